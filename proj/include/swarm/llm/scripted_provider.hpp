#pragma once

#include "swarm/llm/provider.hpp"

#include <filesystem>
#include <mutex>

namespace swarm::llm {

/// Deterministic provider that replays a JSON scenario.
///
/// Scenario shape:
///   {"steps": [{"match": {"last_user_contains": "...", "awaiting_tool": "..."},
///               "respond": {"text": "...", "tool_calls": [{"name": "...", "arguments": {...}}]},
///               "repeat": false}]}
///
/// `awaiting_tool` matches a pending tool result by tool name or call id.
/// `respond.error` ("provider_unavailable" | "malformed_stream" | "context_overflow")
/// makes the step fail instead of answering; `respond.raw_arguments` overrides the
/// serialized argument text of the first call. A `repeat` step is never consumed.
class ScriptedProvider final : public LlmProvider {
public:
    struct ScriptedCall {
        std::string id;
        std::string name;
        json arguments;
    };

    struct Step {
        std::optional<std::string> last_user_contains;
        std::optional<std::string> awaiting_tool;
        std::string text;
        std::vector<ScriptedCall> tool_calls;
        std::optional<LlmErrorKind> error;
        std::optional<std::string> raw_arguments;
        bool repeat = false;
    };

    explicit ScriptedProvider(std::vector<Step> steps);
    /// Not synchronized; only for handing over a freshly loaded scenario.
    ScriptedProvider(ScriptedProvider&& other) noexcept
        : steps_(std::move(other.steps_)), cursor_(other.cursor_), next_call_(other.next_call_) {}

    static ScriptedProvider from_json(const json& script);
    static ScriptedProvider load(const std::filesystem::path& path);

    void complete_streaming(std::span<const ChatMessage> history,
                            std::span<const ToolDescriptor> tools,
                            const LlmParams& params,
                            const EventSink& sink) override;

    /// Rewinds to the first step and restarts call-id numbering.
    void reset();

    std::size_t steps_consumed() const;
    std::size_t step_count() const { return steps_.size(); }

    static constexpr std::size_t text_fragment_bytes = 16;
    static constexpr std::size_t argument_fragment_bytes = 8;

private:
    std::optional<std::string> mismatch(const Step& step, std::span<const ChatMessage> history) const;

    std::vector<Step> steps_;
    mutable std::mutex mu_;
    std::size_t cursor_ = 0;
    std::size_t next_call_ = 1;
};

/// Splits text into pieces of at most `max_bytes`, never inside a UTF-8 sequence.
std::vector<std::string> split_utf8(std::string_view text, std::size_t max_bytes);

} // namespace swarm::llm
