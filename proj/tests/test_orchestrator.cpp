#include "harness.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

using namespace swarm;
using namespace swarm::orch;
using namespace swarm::testing;
using llm::ChatMessage;
using llm::ParamType;
using std::chrono::milliseconds;

namespace {

/// Provider driven by a callback; counts calls.
class FnProvider final : public llm::LlmProvider {
public:
    using Fn = std::function<void(std::span<const ChatMessage>, const llm::EventSink&)>;
    explicit FnProvider(Fn fn) : fn_(std::move(fn)) {}

    void complete_streaming(std::span<const ChatMessage> history, std::span<const llm::ToolDescriptor>,
                            const llm::LlmParams&, const llm::EventSink& sink) override {
        ++calls;
        fn_(history, sink);
    }

    std::atomic<int> calls{0};

private:
    Fn fn_;
};

ToolDescriptor echo_descriptor(std::string name = "echo") {
    return {std::move(name),
            "Echo the arguments",
            {{"text", ParamType::string, true, std::nullopt, "Text"},
             {"count", ParamType::integer, false, json(1), "Count"},
             {"ratio", ParamType::number, false, std::nullopt, "Ratio"},
             {"flag", ParamType::boolean, false, std::nullopt, "Flag"}}};
}

ToolRegistry echo_registry() {
    ToolRegistry r;
    r.register_tool(echo_descriptor(), [](const json& args, const UserContext& ctx) {
        return json{{"args", args}, {"user", ctx.user_id}};
    }, AgentTag::kfp);
    r.register_tool({"fail", "Always fails", {}}, [](const json&, const UserContext&) -> json {
        throw ToolError(ErrorType::not_found, "nothing here");
    }, AgentTag::minio);
    r.register_tool({"crash", "Throws a plain exception", {}}, [](const json&, const UserContext&) -> json {
        throw std::runtime_error("boom");
    }, AgentTag::rag);
    return r;
}

ErrorType error_type_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ToolError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no ToolError";
    return ErrorType::internal;
}

void answer(const llm::EventSink& sink, const std::string& text) {
    sink(llm::TextDelta{text});
    sink(llm::Finished{});
}

void call_tools(const llm::EventSink& sink, const std::vector<llm::ToolCall>& calls) {
    for (std::size_t i = 0; i < calls.size(); ++i)
        sink(llm::ToolCallDelta{i, calls[i].id, calls[i].name, calls[i].arguments.dump()});
    sink(llm::Finished{llm::FinishReason::tool_calls, {}, {}});
}

Orchestrator::Options fast_retry() {
    Orchestrator::Options o;
    o.retry.backoff = {milliseconds(1), milliseconds(1)};
    return o;
}

} // namespace

TEST(ValidateArguments, FillsDefaultsAndChecksTypes) {
    auto d = echo_descriptor();
    auto out = validate_arguments(d, {{"text", "hi"}});
    EXPECT_EQ(out, json({{"text", "hi"}, {"count", 1}}));
    EXPECT_EQ(validate_arguments(d, {{"text", "hi"}, {"count", 3.0}})["count"], 3);
    EXPECT_EQ(validate_arguments(d, {{"text", "hi"}, {"ratio", 2}})["ratio"], 2);
    EXPECT_FALSE(validate_arguments(d, {{"text", "hi"}, {"flag", nullptr}}).contains("flag"));

    EXPECT_EQ(error_type_of([&] { validate_arguments(d, json::object()); }), ErrorType::invalid_argument);
    EXPECT_EQ(error_type_of([&] { validate_arguments(d, {{"text", 1}}); }), ErrorType::invalid_argument);
    EXPECT_EQ(error_type_of([&] { validate_arguments(d, {{"text", "x"}, {"count", 1.5}}); }), ErrorType::invalid_argument);
    EXPECT_EQ(error_type_of([&] { validate_arguments(d, {{"text", "x"}, {"flag", "yes"}}); }), ErrorType::invalid_argument);
    EXPECT_EQ(error_type_of([&] { validate_arguments(d, json::array()); }), ErrorType::invalid_argument);
    try {
        validate_arguments(d, {{"text", "x"}, {"colour", "red"}});
        FAIL();
    } catch (const ToolError& e) {
        EXPECT_EQ(e.envelope().details["parameter"], "colour");
        EXPECT_TRUE(e.envelope().retryable);
    }
}

TEST(ToolRegistry, RejectsDuplicatesAndBadDescriptors) {
    auto r = echo_registry();
    EXPECT_EQ(r.size(), 3u);
    EXPECT_EQ(r.count(AgentTag::kfp), 1u);
    ToolHandler noop = [](const json&, const UserContext&) { return json::object(); };
    EXPECT_THROW(r.register_tool(echo_descriptor(), noop, AgentTag::kfp), RegistryError);
    EXPECT_THROW(r.register_tool(echo_descriptor("bad name!"), noop, AgentTag::kfp), std::invalid_argument);
    EXPECT_THROW(r.register_tool(echo_descriptor("fresh"), {}, AgentTag::kfp), std::invalid_argument);
    EXPECT_EQ(r.descriptors().front().name, "echo");
}

TEST(ErrorEnvelope, RoundTripsAndMarksRetryable) {
    for (auto t : {ErrorType::invalid_argument, ErrorType::not_found, ErrorType::permission_denied,
                   ErrorType::backend_unavailable, ErrorType::internal}) {
        auto env = ErrorEnvelope::make(t, "m", {{"k", 1}});
        auto back = ErrorEnvelope::from_json(env.to_json());
        EXPECT_EQ(back.error_type, t);
        EXPECT_EQ(back.retryable, is_retryable(t));
        EXPECT_EQ(back.details["k"], 1);
        EXPECT_EQ(error_type_from_string(to_string(t)), t);
    }
}

TEST(DispatchBatch, ResultsInCallOrderAndFailuresIsolated) {
    auto r = echo_registry();
    std::vector<llm::ToolCall> calls{{"a", "echo", {{"text", "one"}}},
                                     {"b", "fail", json::object()},
                                     {"c", "nope", json::object()},
                                     {"d", "crash", json::object()},
                                     {"e", "echo", {{"text", 5}}},
                                     {"f", "echo", {{"text", "six"}}}};
    auto results = dispatch_batch(r, calls, alice(), 4);
    ASSERT_EQ(results.size(), calls.size());
    for (std::size_t i = 0; i < calls.size(); ++i) EXPECT_EQ(results[i].call_id, calls[i].id);
    EXPECT_EQ(results[0].content["args"]["text"], "one");
    EXPECT_EQ(results[0].content["user"], "alice");
    auto type = [&](std::size_t i) { return ErrorEnvelope::from_json(results[i].content).error_type; };
    EXPECT_EQ(type(1), ErrorType::not_found);
    EXPECT_EQ(type(2), ErrorType::not_found);
    EXPECT_EQ(type(3), ErrorType::internal);
    EXPECT_EQ(type(4), ErrorType::invalid_argument);
    EXPECT_EQ(results[5].status, ResultStatus::ok);
}

TEST(DispatchBatch, RunsConcurrentlyUpToTheLimit) {
    auto r = echo_registry();
    CallRecorder recorder(milliseconds(50));
    r.decorate(recorder.wrapper());
    std::vector<llm::ToolCall> calls;
    for (int i = 0; i < 8; ++i) calls.push_back({"c" + std::to_string(i), "echo", {{"text", "x"}}});

    auto start = std::chrono::steady_clock::now();
    dispatch_batch(r, calls, alice(), 4);
    auto parallel = std::chrono::steady_clock::now() - start;
    EXPECT_LT(parallel, milliseconds(8 * 50 - 100));

    auto ivs = recorder.intervals();
    std::size_t max_overlap = 0;
    for (const auto& a : ivs) {
        std::size_t n = 0;
        for (const auto& b : ivs) n += a.start >= b.start && a.start < b.end;
        max_overlap = std::max(max_overlap, n);
    }
    EXPECT_LE(max_overlap, 4u);
    EXPECT_GE(max_overlap, 2u);

    CallRecorder serial_rec(milliseconds(10));
    auto serial = echo_registry();
    serial.decorate(serial_rec.wrapper());
    dispatch_batch(serial, calls, alice(), 1);
    auto sivs = serial_rec.intervals();
    for (std::size_t i = 1; i < sivs.size(); ++i) EXPECT_GE(sivs[i].start, sivs[i - 1].end);
}

TEST(SerializeForHistory, TruncatesLargeResults) {
    ToolResult small{"c1", ResultStatus::ok, {{"x", 1}}, milliseconds(3)};
    auto rec = json::parse(serialize_for_history(small));
    EXPECT_EQ(rec["call_id"], "c1");
    EXPECT_EQ(rec["content"]["x"], 1);
    EXPECT_FALSE(rec.contains("truncated"));

    ToolResult big{"c2", ResultStatus::ok, {{"blob", std::string(5000, 'z')}}, {}};
    auto cut = json::parse(serialize_for_history(big, 1000));
    EXPECT_TRUE(cut["truncated"].get<bool>());
    EXPECT_EQ(cut["content"].get<std::string>().size(), 1000u);
}

TEST(TrimHistory, KeepsNewestWholeUnitsWithinBudget) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ChatMessage> history;
        std::vector<std::size_t> unit_starts;
        int call = 0;
        for (int u = 0, n = 1 + rng() % 12; u < n; ++u) {
            unit_starts.push_back(history.size());
            std::string text(1 + rng() % 200, 'x');
            switch (rng() % 3) {
            case 0: history.push_back(ChatMessage::user(text)); break;
            case 1: history.push_back(ChatMessage::assistant(text)); break;
            default: {
                std::vector<llm::ToolCall> calls;
                for (int k = 0, m = 1 + rng() % 3; k < m; ++k)
                    calls.push_back({"c" + std::to_string(call++), "echo", {{"text", text}}});
                history.push_back(ChatMessage::assistant("", calls));
                for (const auto& c : calls) history.push_back(ChatMessage::tool(c.id, text));
            }
            }
        }
        std::size_t budget = rng() % 1500;
        auto kept = trim_history(history, budget);
        ASSERT_FALSE(kept.empty());
        std::size_t start = history.size() - kept.size();
        EXPECT_TRUE(std::equal(kept.begin(), kept.end(), history.begin() + static_cast<std::ptrdiff_t>(start)));
        EXPECT_NE(std::find(unit_starts.begin(), unit_starts.end(), start), unit_starts.end()) << "cut inside a unit";
        EXPECT_FALSE(session::pairing_violation(kept));
        std::size_t used = 0;
        for (const auto& m : kept) used += message_chars(m);
        bool only_newest = start == unit_starts.back();
        EXPECT_TRUE(used <= budget || only_newest);
        if (start > 0) {
            // Maximal: the previous unit would not have fit.
            auto prev = *std::prev(std::find(unit_starts.begin(), unit_starts.end(), start));
            std::size_t extra = 0;
            for (auto i = prev; i < start; ++i) extra += message_chars(history[i]);
            EXPECT_GT(used + extra, budget);
        }
    }
}

TEST(BuildContext, SystemPromptCarriesUserScopeButNoCredential) {
    session::SessionStore store;
    auto s = store.create_session(alice());
    store.append_messages(s.session_id, {ChatMessage::user("hello")});
    auto ctx = build_context(store.get_session(s.session_id, "alice"), echo_registry());
    ASSERT_GE(ctx.messages.size(), 2u);
    EXPECT_EQ(ctx.messages[0].role, llm::Role::system);
    EXPECT_NE(ctx.messages[0].content.find("team-a"), std::string::npos);
    EXPECT_NE(ctx.messages[0].content.find("team-a-data"), std::string::npos);
    EXPECT_EQ(ctx.messages[0].content.find("cred-team-a"), std::string::npos);
    EXPECT_EQ(ctx.tools.size(), 3u);
    EXPECT_EQ(render_system_prompt("{{user_id}}@{{namespace}}", alice()), "alice@team-a");
}

TEST(Orchestrator, ToolLoopPersistsPairedHistory) {
    auto registry = echo_registry();
    session::SessionStore store;
    FnProvider provider([](std::span<const ChatMessage> h, const llm::EventSink& sink) {
        if (h.back().role == llm::Role::user)
            call_tools(sink, {{"t1", "echo", {{"text", "a"}}}, {"t2", "fail", json::object()}});
        else
            answer(sink, "done");
    });
    Orchestrator orch(store, registry, provider);
    auto s = store.create_session(alice());
    std::vector<TurnEvent> events;
    auto trace = orch.run_turn(s.session_id, "go", [&](const TurnEvent& e) { events.push_back(e); });

    EXPECT_EQ(event_names(events),
              (std::vector<std::string>{"tool_call", "tool_call", "tool_result", "tool_result", "token", "final"}));
    EXPECT_EQ(trace.iterations, 2u);
    EXPECT_FALSE(trace_violation(trace));
    auto history = store.get_history(s.session_id, "alice");
    ASSERT_EQ(history->size(), 5u);
    EXPECT_EQ(history->at(0).content, "go");
    auto failed = json::parse(history->at(3).content);
    EXPECT_EQ(failed["status"], "error");
    EXPECT_EQ(failed["content"]["error_type"], "NOT_FOUND");
    EXPECT_FALSE(session::pairing_violation(*history));
}

TEST(Orchestrator, IterationLimitEndsWithPartialSummary) {
    auto registry = echo_registry();
    session::SessionStore store;
    int n = 0;
    FnProvider provider([&](std::span<const ChatMessage>, const llm::EventSink& sink) {
        call_tools(sink, {{"loop" + std::to_string(n++), "echo", {{"text", "again"}}}});
    });
    Orchestrator::Options o;
    o.turn.max_iterations = 3;
    Orchestrator orch(store, registry, provider, o);
    auto s = store.create_session(alice());
    std::optional<FinalEvent> final;
    auto trace = orch.run_turn(s.session_id, "loop forever", [&](const TurnEvent& e) {
        if (auto* f = std::get_if<FinalEvent>(&e)) final = *f;
    });
    ASSERT_TRUE(final);
    EXPECT_TRUE(final->truncated);
    EXPECT_EQ(final->iterations, 3u);
    EXPECT_TRUE(trace.truncated);
    EXPECT_EQ(provider.calls, 3);
    EXPECT_FALSE(final->message.empty());
    EXPECT_FALSE(session::pairing_violation(*store.get_history(s.session_id, "alice")));
    EXPECT_FALSE(trace_violation(trace));
}

TEST(Orchestrator, RetriesUnavailableProviderBeforeAnyToken) {
    auto registry = echo_registry();
    session::SessionStore store;
    int attempts = 0;
    FnProvider flaky([&](std::span<const ChatMessage>, const llm::EventSink& sink) {
        if (++attempts < 3) return sink(llm::Finished{llm::FinishReason::error, llm::LlmErrorKind::provider_unavailable, "503"});
        answer(sink, "recovered");
    });
    Orchestrator orch(store, registry, flaky, fast_retry());
    auto s = store.create_session(alice());
    std::vector<TurnEvent> events;
    orch.run_turn(s.session_id, "hi", [&](const TurnEvent& e) { events.push_back(e); });
    EXPECT_EQ(attempts, 3);
    EXPECT_EQ(std::get<FinalEvent>(events.back()).message, "recovered");
}

TEST(Orchestrator, ExhaustedRetriesAndMidStreamFailuresBecomeErrorEvents) {
    auto registry = echo_registry();
    session::SessionStore store;
    FnProvider down([](std::span<const ChatMessage>, const llm::EventSink& sink) {
        sink(llm::Finished{llm::FinishReason::error, llm::LlmErrorKind::provider_unavailable, "503"});
    });
    Orchestrator orch(store, registry, down, fast_retry());
    auto s = store.create_session(alice());
    std::vector<TurnEvent> events;
    auto trace = orch.run_turn(s.session_id, "hi", [&](const TurnEvent& e) { events.push_back(e); });
    EXPECT_EQ(down.calls, 3);
    ASSERT_TRUE(std::holds_alternative<ErrorEvent>(events.back()));
    EXPECT_EQ(std::get<ErrorEvent>(events.back()).envelope.error_type, ErrorType::backend_unavailable);
    EXPECT_FALSE(trace_violation(trace));

    FnProvider mid([](std::span<const ChatMessage>, const llm::EventSink& sink) {
        sink(llm::TextDelta{"partial"});
        sink(llm::Finished{llm::FinishReason::error, llm::LlmErrorKind::provider_unavailable, "reset"});
    });
    Orchestrator orch2(store, registry, mid, fast_retry());
    events.clear();
    orch2.run_turn(s.session_id, "again", [&](const TurnEvent& e) { events.push_back(e); });
    EXPECT_EQ(mid.calls, 1) << "no retry after a token was forwarded";
    EXPECT_EQ(event_names(events), (std::vector<std::string>{"token", "error"}));
}

TEST(Orchestrator, MalformedStreamIsInternal) {
    auto registry = echo_registry();
    session::SessionStore store;
    FnProvider bad([](std::span<const ChatMessage>, const llm::EventSink& sink) {
        sink(llm::ToolCallDelta{0, "x", "echo", "{broken"});
        sink(llm::Finished{llm::FinishReason::tool_calls, {}, {}});
    });
    Orchestrator orch(store, registry, bad, fast_retry());
    auto s = store.create_session(alice());
    std::vector<TurnEvent> events;
    orch.run_turn(s.session_id, "hi", [&](const TurnEvent& e) { events.push_back(e); });
    EXPECT_EQ(std::get<ErrorEvent>(events.back()).envelope.error_type, ErrorType::internal);
    EXPECT_FALSE(session::pairing_violation(*store.get_history(s.session_id, "alice")));
}

TEST(Orchestrator, OneTurnPerSession) {
    auto registry = echo_registry();
    session::SessionStore store;
    FnProvider provider([](std::span<const ChatMessage>, const llm::EventSink& sink) { answer(sink, "ok"); });
    Orchestrator orch(store, registry, provider);
    auto s = store.create_session(alice());
    auto other = store.create_session(bob());
    {
        auto lease = orch.acquire(s.session_id);
        try {
            orch.acquire(s.session_id);
            FAIL() << "second lease granted";
        } catch (const TurnError& e) {
            EXPECT_EQ(e.kind(), TurnErrorKind::session_busy);
        }
        EXPECT_NO_THROW(orch.acquire(other.session_id));
        orch.run_turn(std::move(lease), "hi");
    }
    EXPECT_NO_THROW(orch.acquire(s.session_id));
    EXPECT_THROW(orch.acquire("missing"), session::StoreError);
    try {
        orch.run_turn(s.session_id, "");
        FAIL();
    } catch (const TurnError& e) {
        EXPECT_EQ(e.kind(), TurnErrorKind::empty_input);
    }
}

TEST(Orchestrator, TraceFileIsAppendedPerSession) {
    TempDir dir("trace");
    auto registry = echo_registry();
    session::SessionStore store;
    FnProvider provider([](std::span<const ChatMessage>, const llm::EventSink& sink) { answer(sink, "ok"); });
    Orchestrator::Options o;
    o.trace_dir = dir.path();
    Orchestrator orch(store, registry, provider, o);
    auto s = store.create_session(alice());
    orch.run_turn(s.session_id, "one");
    orch.run_turn(s.session_id, "two");
    std::ifstream in(dir.path() / (s.session_id + ".jsonl"));
    std::size_t finals = 0;
    for (std::string line; std::getline(in, line);) finals += json::parse(line)["kind"] == "final";
    EXPECT_EQ(finals, 2u);
}
