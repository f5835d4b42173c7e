#pragma once

#include "swarm/llm/provider.hpp"
#include "swarm/url.hpp"

#include <chrono>

namespace swarm::llm {

struct OpenAiConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model;
    std::string api_key;
    std::chrono::seconds timeout{120};

    /// Reads SWARM_LLM_ENDPOINT, SWARM_LLM_MODEL and SWARM_LLM_API_KEY over the defaults.
    static OpenAiConfig from_env(OpenAiConfig defaults);
    static OpenAiConfig from_env() { return from_env(OpenAiConfig{}); }
};

/// Incremental decoder for a chat-completions `text/event-stream` body.
///
/// Bytes may arrive split anywhere. Each `data:` payload is translated into
/// LlmEvents; `finish()` must be called at end of body and emits the single
/// Finished event.
class OpenAiStreamParser {
public:
    explicit OpenAiStreamParser(EventSink sink) : sink_(std::move(sink)) {}

    void feed(std::string_view bytes);
    void finish();

    bool done() const { return finished_; }

private:
    void handle_line(std::string_view line);
    void handle_payload(std::string_view payload);
    void emit_finished(Finished f);

    EventSink sink_;
    std::string buffer_;
    std::optional<FinishReason> reason_;
    bool finished_ = false;
};

/// Request body for POST {endpoint}/chat/completions with streaming enabled.
json build_chat_request(std::span<const ChatMessage> history,
                        std::span<const ToolDescriptor> tools,
                        const LlmParams& params);

class OpenAiProvider final : public LlmProvider {
public:
    explicit OpenAiProvider(OpenAiConfig config);

    void complete_streaming(std::span<const ChatMessage> history,
                            std::span<const ToolDescriptor> tools,
                            const LlmParams& params,
                            const EventSink& sink) override;

private:
    OpenAiConfig config_;
    Endpoint endpoint_;
};

} // namespace swarm::llm
