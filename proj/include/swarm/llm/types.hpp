#pragma once

#include "swarm/error.hpp"
#include "swarm/time.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace swarm::llm {

using json = nlohmann::json;

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct ToolCall {
    std::string id;
    std::string name;
    json arguments = json::object();

    bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
    Role role = Role::user;
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant only
    std::string tool_call_id;          // tool only
    Timestamp created_at{};

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text);
    static ChatMessage assistant(std::string text, std::vector<ToolCall> calls = {});
    static ChatMessage tool(std::string call_id, std::string content);

    bool operator==(const ChatMessage&) const = default;
};

/// Throws std::invalid_argument when the role/field invariants do not hold.
void validate(const ChatMessage& msg);

json to_json(const ToolCall& call);
ToolCall tool_call_from_json(const json& j);
json to_json(const ChatMessage& msg);
ChatMessage message_from_json(const json& j);

enum class ParamType { string, number, integer, boolean, object, array };

std::string_view to_string(ParamType type);
ParamType param_type_from_string(std::string_view text);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::string;
    bool required = false;
    std::optional<json> default_value;
    std::string description;
};

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;
};

/// Name pattern and required-without-default checks.
void validate(const ToolDescriptor& descriptor);

/// JSON-schema object in the form chat-completions APIs expect.
json parameters_schema(const ToolDescriptor& descriptor);

enum class FinishReason { stop, tool_calls, length, error };

std::string_view to_string(FinishReason reason);

enum class LlmErrorKind {
    provider_unavailable,
    malformed_stream,
    context_overflow,
    script_exhausted,
    matcher_mismatch,
};

std::string_view to_string(LlmErrorKind kind);

using LlmError = Error<LlmErrorKind>;

/// Only ProviderUnavailable is worth retrying.
inline bool retryable(LlmErrorKind kind) { return kind == LlmErrorKind::provider_unavailable; }

struct TextDelta {
    std::string text;
};

struct ToolCallDelta {
    std::size_t index = 0;
    std::optional<std::string> id;
    std::optional<std::string> name;
    std::string arguments_fragment;
};

struct Finished {
    FinishReason reason = FinishReason::stop;
    std::optional<LlmErrorKind> error;
    std::string error_message;
};

using LlmEvent = std::variant<TextDelta, ToolCallDelta, Finished>;

json to_json(const LlmEvent& event);

struct LlmParams {
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 2048;
};

} // namespace swarm::llm
