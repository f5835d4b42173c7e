#pragma once

#include "swarm/orchestrator/tool_registry.hpp"
#include "swarm/session/session_store.hpp"

namespace swarm::orch {

using llm::ChatMessage;

struct ContextOptions {
    /// Rough budget in bytes of message text (content plus tool-call arguments).
    std::size_t max_chars = 96 * 1024;
    /// Template with {{user_id}}, {{namespace}} and {{buckets}} placeholders;
    /// empty selects the compiled-in v1 prompt.
    std::string system_prompt_template;
};

std::string render_system_prompt(std::string_view tmpl, const UserContext& ctx);

/// Size of a message as counted against the context budget.
std::size_t message_chars(const ChatMessage& msg);

/// Drops the oldest units until the history fits in `max_chars`. A unit is a
/// user message, a plain assistant message, or an assistant tool-call message
/// together with its tool results, so a call is never separated from its result.
/// The newest unit is always kept.
std::vector<ChatMessage> trim_history(std::span<const ChatMessage> history, std::size_t max_chars);

struct LlmContext {
    std::vector<ChatMessage> messages;
    std::vector<llm::ToolDescriptor> tools;
};

/// System prompt followed by the trimmed history, plus every registered tool.
LlmContext build_context(const session::Session& session, const ToolRegistry& registry,
                         const ContextOptions& options = {});

} // namespace swarm::orch
