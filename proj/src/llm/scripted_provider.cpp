#include "swarm/llm/scripted_provider.hpp"

#include "swarm/utf8.hpp"

#include <fstream>
#include <stdexcept>

namespace swarm::llm {

namespace {

LlmErrorKind error_kind_from_string(const std::string& text) {
    if (text == "provider_unavailable") return LlmErrorKind::provider_unavailable;
    if (text == "malformed_stream") return LlmErrorKind::malformed_stream;
    if (text == "context_overflow") return LlmErrorKind::context_overflow;
    throw std::invalid_argument("unknown scripted error: " + text);
}

const ChatMessage* last_with_role(std::span<const ChatMessage> history, Role role) {
    for (auto it = history.rbegin(); it != history.rend(); ++it)
        if (it->role == role) return &*it;
    return nullptr;
}

} // namespace

std::vector<std::string> split_utf8(std::string_view text, std::size_t max_bytes) {
    std::vector<std::string> pieces;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto piece = utf8_prefix(text.substr(pos), max_bytes);
        if (piece.empty()) piece = text.substr(pos, 1);
        std::size_t end = pos + piece.size();
        pieces.emplace_back(text.substr(pos, end - pos));
        pos = end;
    }
    return pieces;
}

ScriptedProvider::ScriptedProvider(std::vector<Step> steps) : steps_(std::move(steps)) {}

ScriptedProvider ScriptedProvider::from_json(const json& script) {
    if (!script.is_object() || !script.contains("steps") || !script.at("steps").is_array())
        throw std::invalid_argument("script must be an object with a steps array");
    std::vector<Step> steps;
    for (const auto& s : script.at("steps")) {
        Step step;
        if (auto m = s.find("match"); m != s.end()) {
            if (auto v = m->find("last_user_contains"); v != m->end()) step.last_user_contains = v->get<std::string>();
            if (auto v = m->find("awaiting_tool"); v != m->end()) step.awaiting_tool = v->get<std::string>();
        }
        const auto& respond = s.at("respond");
        step.text = respond.value("text", "");
        if (auto calls = respond.find("tool_calls"); calls != respond.end()) {
            for (const auto& c : *calls) {
                ScriptedCall call{c.value("id", ""), c.at("name").get<std::string>(),
                                  c.value("arguments", json::object())};
                if (!call.arguments.is_object()) throw std::invalid_argument("scripted arguments must be objects");
                step.tool_calls.push_back(std::move(call));
            }
        }
        if (auto e = respond.find("error"); e != respond.end()) step.error = error_kind_from_string(e->get<std::string>());
        if (auto r = respond.find("raw_arguments"); r != respond.end()) step.raw_arguments = r->get<std::string>();
        step.repeat = s.value("repeat", false);
        if (step.text.empty() && step.tool_calls.empty() && !step.error)
            throw std::invalid_argument("script step responds with nothing");
        steps.push_back(std::move(step));
    }
    return ScriptedProvider(std::move(steps));
}

ScriptedProvider ScriptedProvider::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open script " + path.string());
    auto script = json::parse(in, nullptr, false);
    if (script.is_discarded()) throw std::invalid_argument("script is not valid JSON: " + path.string());
    return from_json(script);
}

void ScriptedProvider::reset() {
    std::lock_guard lock(mu_);
    cursor_ = 0;
    next_call_ = 1;
}

std::size_t ScriptedProvider::steps_consumed() const {
    std::lock_guard lock(mu_);
    return cursor_;
}

std::optional<std::string> ScriptedProvider::mismatch(const Step& step, std::span<const ChatMessage> history) const {
    if (step.last_user_contains) {
        const auto* user = last_with_role(history, Role::user);
        if (!user || user->content.find(*step.last_user_contains) == std::string::npos)
            return "expected last user message containing \"" + *step.last_user_contains + "\"";
    }
    if (step.awaiting_tool) {
        // pending results are the tool messages after the last assistant message
        std::size_t tail = history.size();
        while (tail > 0 && history[tail - 1].role == Role::tool) --tail;
        const ChatMessage* caller = tail > 0 && history[tail - 1].role == Role::assistant ? &history[tail - 1] : nullptr;
        bool found = false;
        for (std::size_t i = tail; i < history.size() && caller && !found; ++i) {
            const auto& id = history[i].tool_call_id;
            if (id == *step.awaiting_tool) found = true;
            for (const auto& call : caller->tool_calls)
                if (call.id == id && call.name == *step.awaiting_tool) found = true;
        }
        if (!found) return "expected a pending result for \"" + *step.awaiting_tool + "\"";
    }
    return std::nullopt;
}

void ScriptedProvider::complete_streaming(std::span<const ChatMessage> history,
                                          std::span<const ToolDescriptor> /*tools*/,
                                          const LlmParams& /*params*/,
                                          const EventSink& sink) {
    check_history(history);

    Step step;
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mu_);
        if (cursor_ >= steps_.size()) {
            sink(Finished{FinishReason::error, LlmErrorKind::script_exhausted,
                          "script exhausted after " + std::to_string(steps_.size()) + " steps"});
            return;
        }
        if (auto why = mismatch(steps_[cursor_], history)) {
            sink(Finished{FinishReason::error, LlmErrorKind::matcher_mismatch,
                          "step " + std::to_string(cursor_) + ": " + *why});
            return;
        }
        step = steps_[cursor_];
        if (!step.repeat) ++cursor_;
        for (const auto& call : step.tool_calls)
            ids.push_back(call.id.empty() ? "call_" + std::to_string(next_call_++) : call.id);
    }

    if (step.error) {
        sink(Finished{FinishReason::error, *step.error, "scripted " + std::string(to_string(*step.error))});
        return;
    }
    for (auto& piece : split_utf8(step.text, text_fragment_bytes)) sink(TextDelta{std::move(piece)});
    for (std::size_t i = 0; i < step.tool_calls.size(); ++i) {
        const auto& call = step.tool_calls[i];
        sink(ToolCallDelta{i, ids[i], call.name, ""});
        auto args = (i == 0 && step.raw_arguments) ? *step.raw_arguments : call.arguments.dump();
        for (auto& piece : split_utf8(args, argument_fragment_bytes)) sink(ToolCallDelta{i, {}, {}, std::move(piece)});
    }
    sink(Finished{step.tool_calls.empty() ? FinishReason::stop : FinishReason::tool_calls, {}, {}});
}

} // namespace swarm::llm
