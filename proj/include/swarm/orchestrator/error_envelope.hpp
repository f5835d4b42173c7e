#pragma once

#include "swarm/error.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace swarm {

enum class ErrorType { invalid_argument, not_found, permission_denied, backend_unavailable, internal };

/// Wire spelling, e.g. "INVALID_ARGUMENT".
std::string_view to_string(ErrorType type);
ErrorType error_type_from_string(std::string_view text);

/// The LLM may retry after adjusting arguments, or later for a flaky backend.
inline bool is_retryable(ErrorType type) {
    return type == ErrorType::invalid_argument || type == ErrorType::backend_unavailable;
}

/// Serializable failure returned to the LLM in place of a tool result.
struct ErrorEnvelope {
    ErrorType error_type = ErrorType::internal;
    std::string message;
    bool retryable = false;
    nlohmann::json details = nlohmann::json::object();

    static ErrorEnvelope make(ErrorType type, std::string message, nlohmann::json details = nlohmann::json::object());

    nlohmann::json to_json() const;
    static ErrorEnvelope from_json(const nlohmann::json& j);
};

/// Thrown by agent operations; dispatch turns it into an ErrorEnvelope.
class ToolError : public Error<ErrorType> {
public:
    ToolError(ErrorType type, const std::string& message, nlohmann::json details = nlohmann::json::object())
        : Error<ErrorType>(type, message), details_(std::move(details)) {}

    const nlohmann::json& details() const { return details_; }
    ErrorEnvelope envelope() const { return ErrorEnvelope::make(kind(), what(), details_); }

private:
    nlohmann::json details_;
};

} // namespace swarm
