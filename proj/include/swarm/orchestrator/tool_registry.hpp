#pragma once

#include "swarm/llm/types.hpp"
#include "swarm/orchestrator/error_envelope.hpp"
#include "swarm/session/user_context.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <span>

namespace swarm::orch {

using llm::json;
using llm::ToolCall;
using llm::ToolDescriptor;

enum class AgentTag { kfp, minio, rag };

std::string_view to_string(AgentTag tag);

/// Receives arguments already validated against the descriptor, with defaults
/// filled in. Failures are reported by throwing ToolError.
using ToolHandler = std::function<json(const json& args, const UserContext& ctx)>;

enum class ResultStatus { ok, error };

struct ToolResult {
    std::string call_id;
    ResultStatus status = ResultStatus::ok;
    json content;  // tool output, or an ErrorEnvelope when status == error
    std::chrono::milliseconds elapsed{0};

    static ToolResult failure(std::string call_id, const ErrorEnvelope& envelope,
                              std::chrono::milliseconds elapsed = {});

    json to_json() const;
    static ToolResult from_json(const json& j);
};

/// Tool results larger than this are cut before they enter the history.
inline constexpr std::size_t history_result_limit = 16 * 1024;

/// Text stored as the tool message content. When the serialized content
/// exceeds `limit` bytes it is replaced by its first `limit` bytes as a string
/// and the record gains "truncated": true.
std::string serialize_for_history(const ToolResult& result, std::size_t limit = history_result_limit);

enum class RegistryErrorKind { duplicate_tool };
using RegistryError = Error<RegistryErrorKind>;

class ToolRegistry {
public:
    struct Entry {
        ToolDescriptor descriptor;
        ToolHandler handler;
        AgentTag agent;
    };

    /// Throws RegistryError on a duplicate name, std::invalid_argument on a bad descriptor.
    void register_tool(ToolDescriptor descriptor, ToolHandler handler, AgentTag agent);

    const Entry* find(std::string_view name) const;
    std::vector<ToolDescriptor> descriptors() const;
    std::size_t size() const { return entries_.size(); }
    std::size_t count(AgentTag agent) const;

    /// Replaces every handler with `wrap(descriptor, handler)`.
    void decorate(const std::function<ToolHandler(const ToolDescriptor&, ToolHandler)>& wrap);

private:
    std::map<std::string, Entry, std::less<>> entries_;
    std::vector<std::string> order_;
};

/// Checks `args` against the descriptor and fills defaults. Throws
/// ToolError{invalid_argument} naming the offending parameter.
json validate_arguments(const ToolDescriptor& descriptor, const json& args);

/// Runs every call and returns results in call order. Up to `concurrency`
/// handlers run at once; one failing call never affects its siblings.
std::vector<ToolResult> dispatch_batch(const ToolRegistry& registry,
                                       std::span<const ToolCall> calls,
                                       const UserContext& ctx,
                                       std::size_t concurrency = 4);

} // namespace swarm::orch
