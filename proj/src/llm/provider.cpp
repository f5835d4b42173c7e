#include "swarm/llm/provider.hpp"

#include <stdexcept>

namespace swarm::llm {

void check_history(std::span<const ChatMessage> history) {
    if (history.empty()) throw std::invalid_argument("history is empty");
    auto first = history.front().role;
    if (first != Role::system && first != Role::user)
        throw std::invalid_argument("history must start with a system or user message");
}

const Finished& StreamAssembler::finish() const {
    if (!finish_) throw std::logic_error("stream not finished");
    return *finish_;
}

void StreamAssembler::feed(const LlmEvent& event) {
    if (finish_) throw LlmError(LlmErrorKind::malformed_stream, "event after Finished");

    if (const auto* text = std::get_if<TextDelta>(&event)) {
        text_ += text->text;
    } else if (const auto* delta = std::get_if<ToolCallDelta>(&event)) {
        auto& partial = partials_[delta->index];
        if (delta->id && !delta->id->empty()) {
            if (!partial.id.empty() && partial.id != *delta->id)
                throw LlmError(LlmErrorKind::malformed_stream, "tool call id changed mid-stream");
            partial.id = *delta->id;
        }
        if (delta->name && !delta->name->empty()) partial.name += *delta->name;
        partial.arguments += delta->arguments_fragment;
    } else {
        finish_ = std::get<Finished>(event);
        if (finish_->reason == FinishReason::error) return;
        if (!partials_.empty() && finish_->reason == FinishReason::stop) finish_->reason = FinishReason::tool_calls;
        if (finish_->reason == FinishReason::tool_calls) assemble_calls();
    }
}

void StreamAssembler::assemble_calls() {
    if (partials_.empty()) throw LlmError(LlmErrorKind::malformed_stream, "finish_reason tool_calls without calls");
    for (const auto& [index, partial] : partials_) {
        if (partial.id.empty() || partial.name.empty())
            throw LlmError(LlmErrorKind::malformed_stream,
                           "tool call at index " + std::to_string(index) + " lacks id or name");
        ToolCall call{partial.id, partial.name, json::object()};
        if (!partial.arguments.empty()) {
            call.arguments = json::parse(partial.arguments, nullptr, false);
            if (call.arguments.is_discarded() || !call.arguments.is_object())
                throw LlmError(LlmErrorKind::malformed_stream,
                               "arguments of tool call " + partial.id + " are not a JSON object");
        }
        for (const auto& prior : calls_)
            if (prior.id == call.id) throw LlmError(LlmErrorKind::malformed_stream, "duplicate tool call id " + call.id);
        calls_.push_back(std::move(call));
    }
}

ChatMessage StreamAssembler::message() const {
    return ChatMessage::assistant(text_, calls_);
}

} // namespace swarm::llm
