#pragma once

#include "swarm/llm/types.hpp"

#include <functional>
#include <map>
#include <span>

namespace swarm::llm {

using EventSink = std::function<void(const LlmEvent&)>;

/// An LLM with function calling behind one streaming call.
///
/// Implementations deliver events to `sink` on the calling thread and finish
/// with exactly one Finished event; provider failures are reported through
/// Finished{error} rather than thrown. Instances may be shared across threads.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;

    virtual void complete_streaming(std::span<const ChatMessage> history,
                                    std::span<const ToolDescriptor> tools,
                                    const LlmParams& params,
                                    const EventSink& sink) = 0;
};

/// Throws std::invalid_argument unless history is non-empty and starts with
/// a system or user message.
void check_history(std::span<const ChatMessage> history);

/// Folds an event stream into a single assistant message.
///
/// Argument fragments are buffered per tool-call index and parsed once, when
/// the Finished event arrives. Protocol violations throw
/// LlmError{malformed_stream}.
class StreamAssembler {
public:
    void feed(const LlmEvent& event);

    bool finished() const { return finish_.has_value(); }
    const Finished& finish() const;

    const std::string& text() const { return text_; }
    const std::vector<ToolCall>& tool_calls() const { return calls_; }

    /// Assistant message built from the assembled text and calls.
    ChatMessage message() const;

private:
    struct Partial {
        std::string id;
        std::string name;
        std::string arguments;
    };

    void assemble_calls();

    std::string text_;
    std::map<std::size_t, Partial> partials_;
    std::vector<ToolCall> calls_;
    std::optional<Finished> finish_;
};

} // namespace swarm::llm
