#include "swarm/orchestrator/orchestrator.hpp"

#include "swarm/ids.hpp"

#include <fstream>
#include <map>
#include <thread>

namespace swarm::orch {

using llm::FinishReason;
using llm::LlmErrorKind;

std::string_view to_string(TraceKind kind) {
    switch (kind) {
    case TraceKind::llm_request: return "llm_request";
    case TraceKind::text_delta: return "text_delta";
    case TraceKind::tool_call: return "tool_call";
    case TraceKind::tool_result: return "tool_result";
    case TraceKind::final: return "final";
    }
    return "final";
}

std::string TurnTrace::to_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        json line{{"turn_id", turn_id},
                  {"session_id", session_id},
                  {"seq", i},
                  {"kind", to_string(r.kind)},
                  {"payload", r.payload},
                  {"at", format_timestamp(r.at)}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::optional<std::string> trace_violation(const TurnTrace& trace) {
    std::map<std::string, int> pending;
    std::size_t finals = 0;
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& r = trace.records[i];
        if (finals > 0) return "record after final at " + std::to_string(i);
        if (r.kind == TraceKind::tool_call) {
            if (pending.count(r.payload.at("id").get<std::string>()))
                return "duplicate tool_call " + r.payload.at("id").get<std::string>();
            pending[r.payload.at("id").get<std::string>()] = 1;
        } else if (r.kind == TraceKind::tool_result) {
            auto id = r.payload.at("id").get<std::string>();
            auto it = pending.find(id);
            if (it == pending.end() || it->second != 1) return "tool_result without a pending call: " + id;
            it->second = 2;
        } else if (r.kind == TraceKind::final) {
            ++finals;
        }
    }
    for (const auto& [id, state] : pending)
        if (state != 2) return "tool_call " + id + " has no result";
    if (finals != 1) return "expected exactly one final record, found " + std::to_string(finals);
    return std::nullopt;
}

Orchestrator::TurnLease::TurnLease(Orchestrator* owner, std::string session_id)
    : owner_(owner), session_id_(std::move(session_id)) {}

Orchestrator::TurnLease::TurnLease(TurnLease&& other) noexcept
    : owner_(std::exchange(other.owner_, nullptr)), session_id_(std::move(other.session_id_)) {}

Orchestrator::TurnLease::~TurnLease() {
    if (owner_) owner_->release(session_id_);
}

Orchestrator::Orchestrator(session::SessionStore& store, const ToolRegistry& registry, llm::LlmProvider& provider,
                           Options options)
    : store_(store), registry_(registry), provider_(provider), options_(std::move(options)) {
    if (options_.turn.max_iterations == 0) throw std::invalid_argument("max_iterations must be at least 1");
    if (options_.trace_dir) std::filesystem::create_directories(*options_.trace_dir);
}

Orchestrator::TurnLease Orchestrator::acquire(const std::string& session_id) {
    store_.owner(session_id);  // SessionNotFound
    std::lock_guard lock(busy_mu_);
    if (!busy_.insert(session_id).second)
        throw TurnError(TurnErrorKind::session_busy, "session " + session_id + " already has a turn in flight");
    return TurnLease(this, session_id);
}

void Orchestrator::release(const std::string& session_id) {
    std::lock_guard lock(busy_mu_);
    busy_.erase(session_id);
}

TurnTrace Orchestrator::run_turn(const std::string& session_id, const std::string& user_text, const TurnSink& sink) {
    return run_turn(acquire(session_id), user_text, sink);
}

namespace {

ErrorEnvelope envelope_for(LlmErrorKind kind, const std::string& message) {
    auto text = std::string(llm::to_string(kind)) + ": " + message;
    switch (kind) {
    case LlmErrorKind::provider_unavailable: return ErrorEnvelope::make(ErrorType::backend_unavailable, text);
    default: return ErrorEnvelope::make(ErrorType::internal, text);
    }
}

std::string partial_progress(std::size_t iterations, const std::vector<std::pair<std::string, ResultStatus>>& calls) {
    std::string text = "I stopped after " + std::to_string(iterations) +
                       " reasoning steps without reaching a final answer.";
    if (!calls.empty()) {
        text += " Tool calls completed so far:";
        for (const auto& [name, status] : calls)
            text += "\n- " + name + (status == ResultStatus::ok ? " (ok)" : " (error)");
    }
    text += "\nAsk me to continue or narrow the request.";
    return text;
}

} // namespace

TurnTrace Orchestrator::run_turn(TurnLease lease, const std::string& user_text, const TurnSink& sink) {
    if (user_text.empty()) throw TurnError(TurnErrorKind::empty_input, "user text is empty");

    const auto& session_id = lease.session_id();
    auto owner = store_.owner(session_id);

    TurnTrace trace;
    trace.turn_id = "turn-" + random_hex(8);
    trace.session_id = session_id;

    auto record = [&](TraceKind kind, json payload) { trace.records.push_back({kind, std::move(payload), now_utc()}); };
    auto emit = [&](const TurnEvent& event) {
        if (sink) sink(event);
    };
    auto persist_trace = [&] {
        if (!options_.trace_dir) return;
        std::lock_guard lock(trace_mu_);
        std::ofstream out(*options_.trace_dir / (session_id + ".jsonl"), std::ios::app | std::ios::binary);
        out << trace.to_jsonl();
    };
    auto fail = [&](const ErrorEnvelope& envelope) {
        record(TraceKind::final, {{"error", envelope.to_json()}, {"iterations", trace.iterations}});
        emit(ErrorEvent{envelope});
        persist_trace();
        return trace;
    };

    store_.append_messages(session_id, {ChatMessage::user(user_text)});

    std::vector<std::pair<std::string, ResultStatus>> completed;
    const auto& cfg = options_.turn;

    for (std::size_t iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
        trace.iterations = iteration;
        auto session = store_.get_session(session_id, owner.user_id);
        auto context = build_context(session, registry_, options_.context);

        std::optional<llm::StreamAssembler> assembled;
        std::optional<ErrorEnvelope> failure;
        for (std::size_t attempt = 0;; ++attempt) {
            record(TraceKind::llm_request, {{"iteration", iteration},
                                            {"attempt", attempt},
                                            {"messages", context.messages.size()},
                                            {"tools", context.tools.size()}});
            llm::StreamAssembler assembler;
            bool forwarded = false;
            std::optional<LlmErrorKind> error;
            std::string error_message;
            try {
                provider_.complete_streaming(context.messages, context.tools, options_.llm, [&](const llm::LlmEvent& ev) {
                    assembler.feed(ev);
                    if (const auto* text = std::get_if<llm::TextDelta>(&ev); text && !text->text.empty()) {
                        forwarded = true;
                        record(TraceKind::text_delta, {{"text", text->text}});
                        emit(TokenEvent{text->text});
                    }
                });
                if (!assembler.finished()) {
                    error = LlmErrorKind::malformed_stream;
                    error_message = "stream ended without Finished";
                } else if (assembler.finish().reason == FinishReason::error) {
                    error = assembler.finish().error.value_or(LlmErrorKind::malformed_stream);
                    error_message = assembler.finish().error_message;
                }
            } catch (const llm::LlmError& e) {
                error = e.kind();
                error_message = e.what();
            } catch (const std::exception& e) {
                error = LlmErrorKind::malformed_stream;
                error_message = e.what();
            }

            if (!error) {
                assembled = std::move(assembler);
                break;
            }
            if (llm::retryable(*error) && !forwarded && attempt < options_.retry.backoff.size()) {
                std::this_thread::sleep_for(options_.retry.backoff[attempt]);
                continue;
            }
            failure = envelope_for(*error, error_message);
            break;
        }
        if (failure) return fail(*failure);

        auto message = assembled->message();
        if (assembled->finish().reason != FinishReason::tool_calls) {
            store_.append_messages(session_id, {message});
            record(TraceKind::final, {{"message", message.content}, {"truncated", false}, {"iterations", iteration}});
            emit(FinalEvent{message.content, false, iteration});
            persist_trace();
            return trace;
        }

        for (const auto& call : message.tool_calls) {
            record(TraceKind::tool_call, llm::to_json(call));
            emit(ToolCallStarted{call});
        }
        auto results = dispatch_batch(registry_, message.tool_calls, owner, cfg.parallel ? cfg.batch_concurrency : 1);

        std::vector<ChatMessage> batch;
        batch.push_back(message);
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& call = message.tool_calls[i];
            const auto& result = results[i];
            record(TraceKind::tool_result, {{"id", call.id},
                                            {"name", call.name},
                                            {"status", result.status == ResultStatus::ok ? "ok" : "error"},
                                            {"result", result.to_json()}});
            emit(ToolResultEvent{call.name, result});
            completed.emplace_back(call.name, result.status);
            batch.push_back(ChatMessage::tool(call.id, serialize_for_history(result)));
        }
        store_.append_messages(session_id, std::move(batch));
    }

    trace.truncated = true;
    auto summary = partial_progress(trace.iterations, completed);
    store_.append_messages(session_id, {ChatMessage::assistant(summary)});
    record(TraceKind::final, {{"message", summary}, {"truncated", true}, {"iterations", trace.iterations}});
    emit(FinalEvent{summary, true, trace.iterations});
    persist_trace();
    return trace;
}

} // namespace swarm::orch
