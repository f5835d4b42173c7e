#pragma once

#include "swarm/llm/provider.hpp"
#include "swarm/orchestrator/context.hpp"

#include <filesystem>
#include <set>

namespace swarm::orch {

struct TurnConfig {
    std::size_t max_iterations = 8;
    bool parallel = true;
    std::size_t batch_concurrency = 4;
};

struct RetryPolicy {
    /// Delay before each retry; its length is the retry count.
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(250), std::chrono::milliseconds(1000)};
};

enum class TraceKind { llm_request, text_delta, tool_call, tool_result, final };

std::string_view to_string(TraceKind kind);

struct TraceRecord {
    TraceKind kind = TraceKind::final;
    json payload;
    Timestamp at{};
};

struct TurnTrace {
    std::string turn_id;
    std::string session_id;
    std::vector<TraceRecord> records;
    std::size_t iterations = 0;
    bool truncated = false;

    /// One JSON object per record, newline-terminated.
    std::string to_jsonl() const;
};

/// Checks that every tool_call record is answered by exactly one later
/// tool_result and that a single final record closes the trace.
std::optional<std::string> trace_violation(const TurnTrace& trace);

struct TokenEvent {
    std::string text;
};
struct ToolCallStarted {
    ToolCall call;
};
struct ToolResultEvent {
    std::string name;
    ToolResult result;
};
struct FinalEvent {
    std::string message;
    bool truncated = false;
    std::size_t iterations = 0;
};
struct ErrorEvent {
    ErrorEnvelope envelope;
};

using TurnEvent = std::variant<TokenEvent, ToolCallStarted, ToolResultEvent, FinalEvent, ErrorEvent>;
using TurnSink = std::function<void(const TurnEvent&)>;

enum class TurnErrorKind { session_busy, empty_input };
using TurnError = Error<TurnErrorKind>;

/// The reasoning loop: stream the LLM, dispatch requested tools, fold results
/// back into the session history, repeat until a plain answer or the
/// iteration limit.
class Orchestrator {
public:
    struct Options {
        TurnConfig turn;
        RetryPolicy retry;
        ContextOptions context;
        llm::LlmParams llm;
        /// When set, traces are appended to <trace_dir>/<session_id>.jsonl.
        std::optional<std::filesystem::path> trace_dir;
    };

    /// Marks a session as having a turn in flight until destroyed.
    class TurnLease {
    public:
        TurnLease(TurnLease&& other) noexcept;
        TurnLease& operator=(TurnLease&&) = delete;
        ~TurnLease();

        const std::string& session_id() const { return session_id_; }

    private:
        friend class Orchestrator;
        TurnLease(Orchestrator* owner, std::string session_id);

        Orchestrator* owner_;
        std::string session_id_;
    };

    Orchestrator(session::SessionStore& store, const ToolRegistry& registry, llm::LlmProvider& provider,
                 Options options = {});

    /// Throws StoreError{session_not_found} or TurnError{session_busy}.
    TurnLease acquire(const std::string& session_id);

    TurnTrace run_turn(TurnLease lease, const std::string& user_text, const TurnSink& sink = {});
    TurnTrace run_turn(const std::string& session_id, const std::string& user_text, const TurnSink& sink = {});

    const Options& options() const { return options_; }

private:
    void release(const std::string& session_id);

    session::SessionStore& store_;
    const ToolRegistry& registry_;
    llm::LlmProvider& provider_;
    Options options_;
    std::mutex busy_mu_;
    std::set<std::string> busy_;
    std::mutex trace_mu_;
};

} // namespace swarm::orch
