#include "swarm/llm/types.hpp"

#include <regex>
#include <set>
#include <stdexcept>

namespace swarm::llm {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
    }
    return "user";
}

Role role_from_string(std::string_view text) {
    if (text == "system") return Role::system;
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    if (text == "tool") return Role::tool;
    throw std::invalid_argument("unknown role: " + std::string(text));
}

ChatMessage ChatMessage::system(std::string text) {
    return {Role::system, std::move(text), {}, {}, now_utc()};
}

ChatMessage ChatMessage::user(std::string text) {
    return {Role::user, std::move(text), {}, {}, now_utc()};
}

ChatMessage ChatMessage::assistant(std::string text, std::vector<ToolCall> calls) {
    return {Role::assistant, std::move(text), std::move(calls), {}, now_utc()};
}

ChatMessage ChatMessage::tool(std::string call_id, std::string content) {
    return {Role::tool, std::move(content), {}, std::move(call_id), now_utc()};
}

void validate(const ChatMessage& msg) {
    if (msg.role != Role::assistant && !msg.tool_calls.empty())
        throw std::invalid_argument("only assistant messages may carry tool calls");
    if (msg.role == Role::tool) {
        if (msg.tool_call_id.empty()) throw std::invalid_argument("tool message without tool_call_id");
        auto parsed = json::parse(msg.content, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object())
            throw std::invalid_argument("tool message content is not a serialized tool result");
    } else if (!msg.tool_call_id.empty()) {
        throw std::invalid_argument("tool_call_id on a non-tool message");
    }
    std::set<std::string> ids;
    for (const auto& call : msg.tool_calls) {
        if (call.id.empty() || call.name.empty()) throw std::invalid_argument("tool call without id or name");
        if (!call.arguments.is_object()) throw std::invalid_argument("tool call arguments must be an object");
        if (!ids.insert(call.id).second) throw std::invalid_argument("duplicate tool call id " + call.id);
    }
}

json to_json(const ToolCall& call) {
    return {{"id", call.id}, {"name", call.name}, {"arguments", call.arguments}};
}

ToolCall tool_call_from_json(const json& j) {
    ToolCall call;
    call.id = j.at("id").get<std::string>();
    call.name = j.at("name").get<std::string>();
    call.arguments = j.value("arguments", json::object());
    return call;
}

json to_json(const ChatMessage& msg) {
    json j{{"role", to_string(msg.role)}, {"content", msg.content}, {"created_at", format_timestamp(msg.created_at)}};
    if (!msg.tool_calls.empty()) {
        auto& calls = j["tool_calls"] = json::array();
        for (const auto& call : msg.tool_calls) calls.push_back(to_json(call));
    }
    if (!msg.tool_call_id.empty()) j["tool_call_id"] = msg.tool_call_id;
    return j;
}

ChatMessage message_from_json(const json& j) {
    ChatMessage msg;
    msg.role = role_from_string(j.at("role").get<std::string>());
    msg.content = j.value("content", "");
    if (auto it = j.find("tool_calls"); it != j.end())
        for (const auto& call : *it) msg.tool_calls.push_back(tool_call_from_json(call));
    msg.tool_call_id = j.value("tool_call_id", "");
    if (auto it = j.find("created_at"); it != j.end()) msg.created_at = parse_timestamp(it->get<std::string>());
    return msg;
}

std::string_view to_string(ParamType type) {
    switch (type) {
    case ParamType::string: return "string";
    case ParamType::number: return "number";
    case ParamType::integer: return "integer";
    case ParamType::boolean: return "boolean";
    case ParamType::object: return "object";
    case ParamType::array: return "array";
    }
    return "string";
}

ParamType param_type_from_string(std::string_view text) {
    for (auto t : {ParamType::string, ParamType::number, ParamType::integer, ParamType::boolean, ParamType::object,
                   ParamType::array})
        if (to_string(t) == text) return t;
    throw std::invalid_argument("unknown parameter type: " + std::string(text));
}

void validate(const ToolDescriptor& descriptor) {
    static const std::regex name_pattern("[a-z][a-z0-9_]*");
    if (!std::regex_match(descriptor.name, name_pattern))
        throw std::invalid_argument("invalid tool name: " + descriptor.name);
    std::set<std::string> seen;
    for (const auto& p : descriptor.parameters) {
        if (!seen.insert(p.name).second)
            throw std::invalid_argument(descriptor.name + ": duplicate parameter " + p.name);
        if (p.required && p.default_value)
            throw std::invalid_argument(descriptor.name + ": required parameter " + p.name + " has a default");
    }
}

json parameters_schema(const ToolDescriptor& descriptor) {
    json properties = json::object();
    json required = json::array();
    for (const auto& p : descriptor.parameters) {
        json prop{{"type", to_string(p.type)}, {"description", p.description}};
        if (p.default_value) prop["default"] = *p.default_value;
        properties[p.name] = std::move(prop);
        if (p.required) required.push_back(p.name);
    }
    return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::tool_calls: return "tool_calls";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
    }
    return "error";
}

std::string_view to_string(LlmErrorKind kind) {
    switch (kind) {
    case LlmErrorKind::provider_unavailable: return "ProviderUnavailable";
    case LlmErrorKind::malformed_stream: return "MalformedStream";
    case LlmErrorKind::context_overflow: return "ContextOverflow";
    case LlmErrorKind::script_exhausted: return "ScriptExhausted";
    case LlmErrorKind::matcher_mismatch: return "MatcherMismatch";
    }
    return "MalformedStream";
}

json to_json(const LlmEvent& event) {
    return std::visit(
        [](const auto& e) -> json {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, TextDelta>) {
                return {{"type", "text_delta"}, {"text", e.text}};
            } else if constexpr (std::is_same_v<T, ToolCallDelta>) {
                json j{{"type", "tool_call_delta"}, {"index", e.index}, {"arguments", e.arguments_fragment}};
                if (e.id) j["id"] = *e.id;
                if (e.name) j["name"] = *e.name;
                return j;
            } else {
                json j{{"type", "finished"}, {"reason", to_string(e.reason)}};
                if (e.error) {
                    j["error"] = to_string(*e.error);
                    j["message"] = e.error_message;
                }
                return j;
            }
        },
        event);
}

} // namespace swarm::llm
