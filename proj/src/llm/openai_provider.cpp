#include "swarm/llm/openai_provider.hpp"

#include <httplib.h>

#include <cstdlib>

namespace swarm::llm {

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

FinishReason finish_reason_from_wire(std::string_view text) {
    if (text == "tool_calls" || text == "function_call") return FinishReason::tool_calls;
    if (text == "length") return FinishReason::length;
    return FinishReason::stop;
}

json message_to_wire(const ChatMessage& msg) {
    json j{{"role", to_string(msg.role)}, {"content", msg.content}};
    if (msg.role == Role::assistant && !msg.tool_calls.empty()) {
        if (msg.content.empty()) j["content"] = nullptr;
        auto& calls = j["tool_calls"] = json::array();
        for (const auto& call : msg.tool_calls)
            calls.push_back({{"id", call.id},
                             {"type", "function"},
                             {"function", {{"name", call.name}, {"arguments", call.arguments.dump()}}}});
    }
    if (msg.role == Role::tool) j["tool_call_id"] = msg.tool_call_id;
    return j;
}

} // namespace

OpenAiConfig OpenAiConfig::from_env(OpenAiConfig defaults) {
    if (auto v = env("SWARM_LLM_ENDPOINT")) defaults.endpoint = *v;
    if (auto v = env("SWARM_LLM_MODEL")) defaults.model = *v;
    if (auto v = env("SWARM_LLM_API_KEY")) defaults.api_key = *v;
    return defaults;
}

void OpenAiStreamParser::feed(std::string_view bytes) {
    if (finished_) return;
    buffer_.append(bytes);
    std::size_t start = 0;
    for (auto nl = buffer_.find('\n', start); nl != std::string::npos && !finished_; nl = buffer_.find('\n', start)) {
        std::string_view line(buffer_.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        handle_line(line);
        start = nl + 1;
    }
    buffer_.erase(0, start);
}

void OpenAiStreamParser::finish() {
    if (finished_) return;
    if (!buffer_.empty()) {
        std::string rest = std::move(buffer_);
        buffer_.clear();
        handle_line(rest);
        if (finished_) return;
    }
    if (reason_) {
        emit_finished(Finished{*reason_, {}, {}});
    } else {
        emit_finished(Finished{FinishReason::error, LlmErrorKind::malformed_stream, "stream ended without finish_reason"});
    }
}

void OpenAiStreamParser::handle_line(std::string_view line) {
    if (line.empty() || line.front() == ':') return;
    if (line.substr(0, 5) != "data:") return;  // event:, id:, retry: carry nothing we use
    auto payload = line.substr(5);
    while (!payload.empty() && payload.front() == ' ') payload.remove_prefix(1);
    handle_payload(payload);
}

void OpenAiStreamParser::handle_payload(std::string_view payload) {
    if (payload == "[DONE]") {
        emit_finished(Finished{reason_.value_or(FinishReason::stop), {}, {}});
        return;
    }
    auto chunk = json::parse(payload, nullptr, false);
    if (chunk.is_discarded() || !chunk.is_object()) {
        emit_finished(Finished{FinishReason::error, LlmErrorKind::malformed_stream, "unparseable stream chunk"});
        return;
    }
    if (auto err = chunk.find("error"); err != chunk.end()) {
        std::string message = err->is_object() ? err->value("message", err->dump()) : err->dump();
        emit_finished(Finished{FinishReason::error, LlmErrorKind::provider_unavailable, message});
        return;
    }
    auto choices = chunk.find("choices");
    if (choices == chunk.end() || !choices->is_array() || choices->empty()) return;  // e.g. usage-only chunk
    const auto& choice = choices->front();
    if (auto delta = choice.find("delta"); delta != choice.end() && delta->is_object()) {
        if (auto content = delta->find("content"); content != delta->end() && content->is_string()) {
            auto text = content->get<std::string>();
            if (!text.empty()) sink_(TextDelta{std::move(text)});
        }
        if (auto calls = delta->find("tool_calls"); calls != delta->end() && calls->is_array()) {
            for (const auto& call : *calls) {
                ToolCallDelta d;
                d.index = call.value("index", 0u);
                if (auto id = call.find("id"); id != call.end() && id->is_string()) d.id = id->get<std::string>();
                if (auto fn = call.find("function"); fn != call.end() && fn->is_object()) {
                    if (auto n = fn->find("name"); n != fn->end() && n->is_string()) d.name = n->get<std::string>();
                    if (auto a = fn->find("arguments"); a != fn->end() && a->is_string())
                        d.arguments_fragment = a->get<std::string>();
                }
                sink_(d);
            }
        }
    }
    if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string())
        reason_ = finish_reason_from_wire(fr->get<std::string>());
}

void OpenAiStreamParser::emit_finished(Finished f) {
    finished_ = true;
    sink_(f);
}

json build_chat_request(std::span<const ChatMessage> history,
                        std::span<const ToolDescriptor> tools,
                        const LlmParams& params) {
    json body{{"model", params.model},
              {"stream", true},
              {"temperature", params.temperature},
              {"max_tokens", params.max_output_tokens},
              {"messages", json::array()}};
    for (const auto& msg : history) body["messages"].push_back(message_to_wire(msg));
    if (!tools.empty()) {
        auto& list = body["tools"] = json::array();
        for (const auto& t : tools)
            list.push_back({{"type", "function"},
                            {"function",
                             {{"name", t.name}, {"description", t.description}, {"parameters", parameters_schema(t)}}}});
    }
    return body;
}

OpenAiProvider::OpenAiProvider(OpenAiConfig config)
    : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {}

void OpenAiProvider::complete_streaming(std::span<const ChatMessage> history,
                                        std::span<const ToolDescriptor> tools,
                                        const LlmParams& params,
                                        const EventSink& sink) {
    check_history(history);
    LlmParams effective = params;
    if (effective.model.empty()) effective.model = config_.model;

    httplib::Client client(endpoint_.origin());
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(config_.timeout);

    httplib::Request req;
    req.method = "POST";
    req.path = endpoint_.base_path + "/chat/completions";
    req.headers = {{"Accept", "text/event-stream"}, {"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) req.headers.emplace("Authorization", "Bearer " + config_.api_key);
    req.body = build_chat_request(history, tools, effective).dump();

    int status = 0;
    std::string error_body;
    OpenAiStreamParser parser(sink);
    req.response_handler = [&](const httplib::Response& r) {
        status = r.status;
        return true;
    };
    req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t, std::uint64_t) {
        if (status == 200) {
            parser.feed(std::string_view(data, n));
        } else {
            error_body.append(data, n);
        }
        return true;
    };

    auto result = client.send(req);
    if (parser.done()) return;
    if (!result) {
        sink(Finished{FinishReason::error, LlmErrorKind::provider_unavailable,
                      "request failed: " + httplib::to_string(result.error())});
        return;
    }
    if (status != 200) {
        auto kind = error_body.find("context_length_exceeded") != std::string::npos ? LlmErrorKind::context_overflow
                                                                                    : LlmErrorKind::provider_unavailable;
        sink(Finished{FinishReason::error, kind, "HTTP " + std::to_string(status) + ": " + error_body.substr(0, 512)});
        return;
    }
    parser.finish();
}

} // namespace swarm::llm
