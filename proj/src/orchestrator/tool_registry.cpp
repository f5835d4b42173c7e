#include "swarm/orchestrator/tool_registry.hpp"

#include "swarm/utf8.hpp"

#include <atomic>
#include <thread>

namespace swarm {

std::string_view to_string(ErrorType type) {
    switch (type) {
    case ErrorType::invalid_argument: return "INVALID_ARGUMENT";
    case ErrorType::not_found: return "NOT_FOUND";
    case ErrorType::permission_denied: return "PERMISSION_DENIED";
    case ErrorType::backend_unavailable: return "BACKEND_UNAVAILABLE";
    case ErrorType::internal: return "INTERNAL";
    }
    return "INTERNAL";
}

ErrorType error_type_from_string(std::string_view text) {
    for (auto t : {ErrorType::invalid_argument, ErrorType::not_found, ErrorType::permission_denied,
                   ErrorType::backend_unavailable, ErrorType::internal})
        if (to_string(t) == text) return t;
    throw std::invalid_argument("unknown error_type: " + std::string(text));
}

ErrorEnvelope ErrorEnvelope::make(ErrorType type, std::string message, nlohmann::json details) {
    if (message.empty()) message = std::string(to_string(type));
    return {type, std::move(message), is_retryable(type), std::move(details)};
}

nlohmann::json ErrorEnvelope::to_json() const {
    nlohmann::json j{{"status", "error"}, {"error_type", to_string(error_type)}, {"message", message},
                     {"retryable", retryable}};
    if (!details.empty()) j["details"] = details;
    return j;
}

ErrorEnvelope ErrorEnvelope::from_json(const nlohmann::json& j) {
    if (j.value("status", "") != "error") throw std::invalid_argument("not an error envelope");
    ErrorEnvelope e;
    e.error_type = error_type_from_string(j.at("error_type").get<std::string>());
    e.message = j.at("message").get<std::string>();
    e.retryable = j.at("retryable").get<bool>();
    e.details = j.value("details", nlohmann::json::object());
    if (e.message.empty()) throw std::invalid_argument("error envelope with empty message");
    return e;
}

} // namespace swarm

namespace swarm::orch {

std::string_view to_string(AgentTag tag) {
    switch (tag) {
    case AgentTag::kfp: return "kfp";
    case AgentTag::minio: return "minio";
    case AgentTag::rag: return "rag";
    }
    return "kfp";
}

ToolResult ToolResult::failure(std::string call_id, const ErrorEnvelope& envelope, std::chrono::milliseconds elapsed) {
    return {std::move(call_id), ResultStatus::error, envelope.to_json(), elapsed};
}

json ToolResult::to_json() const {
    return {{"call_id", call_id},
            {"status", status == ResultStatus::ok ? "ok" : "error"},
            {"content", content},
            {"elapsed_ms", elapsed.count()}};
}

ToolResult ToolResult::from_json(const json& j) {
    ToolResult r;
    r.call_id = j.at("call_id").get<std::string>();
    auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "error") throw std::invalid_argument("bad tool result status " + status);
    r.status = status == "ok" ? ResultStatus::ok : ResultStatus::error;
    r.content = j.at("content");
    r.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", 0));
    return r;
}

std::string serialize_for_history(const ToolResult& result, std::size_t limit) {
    auto record = result.to_json();
    auto body = result.content.dump();
    if (body.size() > limit) {
        auto cut = std::string(utf8_prefix(body, limit));
        record["content"] = cut;
        record["truncated"] = true;
    }
    return record.dump();
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, ToolHandler handler, AgentTag agent) {
    llm::validate(descriptor);
    if (!handler) throw std::invalid_argument("tool " + descriptor.name + " has no handler");
    if (entries_.contains(descriptor.name))
        throw RegistryError(RegistryErrorKind::duplicate_tool, "tool already registered: " + descriptor.name);
    auto name = descriptor.name;
    entries_.emplace(name, Entry{std::move(descriptor), std::move(handler), agent});
    order_.push_back(std::move(name));
}

const ToolRegistry::Entry* ToolRegistry::find(std::string_view name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<ToolDescriptor> ToolRegistry::descriptors() const {
    std::vector<ToolDescriptor> out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.push_back(entries_.at(name).descriptor);
    return out;
}

std::size_t ToolRegistry::count(AgentTag agent) const {
    std::size_t n = 0;
    for (const auto& [name, entry] : entries_) n += entry.agent == agent;
    return n;
}

void ToolRegistry::decorate(const std::function<ToolHandler(const ToolDescriptor&, ToolHandler)>& wrap) {
    for (auto& [name, entry] : entries_) entry.handler = wrap(entry.descriptor, std::move(entry.handler));
}

namespace {

bool conforms(llm::ParamType type, const json& value) {
    using llm::ParamType;
    switch (type) {
    case ParamType::string: return value.is_string();
    case ParamType::number: return value.is_number();
    case ParamType::integer:
        return value.is_number_integer() ||
               (value.is_number_float() && value.get<double>() == static_cast<double>(static_cast<long long>(value.get<double>())));
    case ParamType::boolean: return value.is_boolean();
    case ParamType::object: return value.is_object();
    case ParamType::array: return value.is_array();
    }
    return false;
}

} // namespace

json validate_arguments(const ToolDescriptor& descriptor, const json& args) {
    if (!args.is_object()) throw ToolError(ErrorType::invalid_argument, "arguments must be a JSON object");
    json out = json::object();
    for (const auto& [key, value] : args.items()) {
        auto spec = std::find_if(descriptor.parameters.begin(), descriptor.parameters.end(),
                                 [&](const auto& p) { return p.name == key; });
        if (spec == descriptor.parameters.end())
            throw ToolError(ErrorType::invalid_argument, "unknown parameter '" + key + "' for " + descriptor.name,
                            {{"parameter", key}});
        if (value.is_null() && !spec->required) continue;
        if (!conforms(spec->type, value))
            throw ToolError(ErrorType::invalid_argument,
                            "parameter '" + key + "' must be of type " + std::string(to_string(spec->type)),
                            {{"parameter", key}, {"expected", to_string(spec->type)}});
        out[key] = spec->type == llm::ParamType::integer && value.is_number_float()
                       ? json(static_cast<long long>(value.get<double>()))
                       : value;
    }
    for (const auto& p : descriptor.parameters) {
        if (out.contains(p.name)) continue;
        if (p.required)
            throw ToolError(ErrorType::invalid_argument, "missing required parameter '" + p.name + "'",
                            {{"parameter", p.name}});
        if (p.default_value) out[p.name] = *p.default_value;
    }
    return out;
}

namespace {

ToolResult run_one(const ToolRegistry& registry, const ToolCall& call, const UserContext& ctx) {
    auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    };
    const auto* entry = registry.find(call.name);
    if (!entry)
        return ToolResult::failure(call.id, ErrorEnvelope::make(ErrorType::not_found, "unknown tool '" + call.name + "'"));
    try {
        auto args = validate_arguments(entry->descriptor, call.arguments);
        auto content = entry->handler(args, ctx);
        return {call.id, ResultStatus::ok, std::move(content), elapsed()};
    } catch (const ToolError& e) {
        return ToolResult::failure(call.id, e.envelope(), elapsed());
    } catch (const std::exception& e) {
        return ToolResult::failure(call.id, ErrorEnvelope::make(ErrorType::internal, e.what()), elapsed());
    } catch (...) {
        return ToolResult::failure(call.id, ErrorEnvelope::make(ErrorType::internal, "unknown failure"), elapsed());
    }
}

} // namespace

std::vector<ToolResult> dispatch_batch(const ToolRegistry& registry,
                                       std::span<const ToolCall> calls,
                                       const UserContext& ctx,
                                       std::size_t concurrency) {
    std::vector<ToolResult> results(calls.size());
    auto workers = std::min(std::max<std::size_t>(concurrency, 1), calls.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < calls.size(); ++i) results[i] = run_one(registry, calls[i], ctx);
        return results;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto i = next++; i < calls.size(); i = next++) results[i] = run_one(registry, calls[i], ctx);
            });
    }
    return results;
}

} // namespace swarm::orch
