#include "swarm/orchestrator/context.hpp"

#include "swarm/system_prompt.hpp"

namespace swarm::orch {

using llm::Role;

namespace {

void replace_all(std::string& text, std::string_view key, std::string_view value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
}

} // namespace

std::string render_system_prompt(std::string_view tmpl, const UserContext& ctx) {
    std::string text(tmpl.empty() ? prompts::system_prompt_v1 : tmpl);
    std::string buckets;
    for (const auto& b : ctx.allowed_buckets) buckets += (buckets.empty() ? "" : ", ") + b;
    if (buckets.empty()) buckets = "(none)";
    replace_all(text, "{{user_id}}", ctx.user_id);
    replace_all(text, "{{namespace}}", ctx.namespace_name);
    replace_all(text, "{{buckets}}", buckets);
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    return text;
}

std::size_t message_chars(const ChatMessage& msg) {
    std::size_t n = msg.content.size();
    for (const auto& call : msg.tool_calls) n += call.name.size() + call.arguments.dump().size();
    return n;
}

std::vector<ChatMessage> trim_history(std::span<const ChatMessage> history, std::size_t max_chars) {
    // unit boundaries: indices where a unit starts
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < history.size(); ++i)
        if (history[i].role != Role::tool) starts.push_back(i);
    if (starts.empty() || starts.front() != 0) starts.insert(starts.begin(), 0);

    std::size_t total = 0;
    for (const auto& msg : history) total += message_chars(msg);

    std::size_t unit = 0;
    while (total > max_chars && unit + 1 < starts.size()) {
        for (auto i = starts[unit]; i < starts[unit + 1]; ++i) total -= message_chars(history[i]);
        ++unit;
    }
    auto first = unit < starts.size() ? starts[unit] : history.size();
    return {history.begin() + static_cast<std::ptrdiff_t>(first), history.end()};
}

LlmContext build_context(const session::Session& session, const ToolRegistry& registry, const ContextOptions& options) {
    LlmContext out;
    auto system = ChatMessage::system(render_system_prompt(options.system_prompt_template, session.user));
    auto budget = options.max_chars > message_chars(system) ? options.max_chars - message_chars(system) : 0;
    out.messages.push_back(std::move(system));
    if (session.history) {
        auto trimmed = trim_history(*session.history, budget);
        out.messages.insert(out.messages.end(), std::make_move_iterator(trimmed.begin()),
                            std::make_move_iterator(trimmed.end()));
    }
    out.tools = registry.descriptors();
    return out;
}

} // namespace swarm::orch
