// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "harness.hpp"

#include "swarm/gateway/server.hpp"
#include "swarm/minio/metrics.hpp"
#include "swarm/rag/text.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <random>
#include <sstream>
#include <thread>

using namespace swarm;
using namespace swarm::testing;
using std::chrono::milliseconds;

namespace {

// Tolerances and budgets.
constexpr double metric_tolerance = 0.001;
constexpr double score_tolerance = 1e-9;
constexpr double norm_tolerance = 1e-6;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& why) {
        if (!ok && pass) {
            pass = false;
            detail = why;
        }
    }
};

int failures = 0;

void run_check(const std::string& name, milliseconds budget, const std::function<Outcome()>& check) {
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = check();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (out.pass && ms > static_cast<double>(budget.count())) {
        out.pass = false;
        out.detail = "took " + std::to_string(ms) + " ms, budget " + std::to_string(budget.count()) + " ms";
    }
    failures += !out.pass;
    std::printf("%s %s [%.1f ms / %lld ms] %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), ms,
                static_cast<long long>(budget.count()), out.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// --- metrics ---------------------------------------------------------------

Outcome metrics_row(minio::ConfusionMatrix m, std::array<double, 4> expected, double auc, const std::string& pipeline) {
    Outcome out;
    auto d = minio::compute_metrics_from_confusion(m);
    std::array<double, 4> got{d.accuracy, d.precision, d.recall, d.f1};
    const char* names[] = {"accuracy", "precision", "recall", "f1"};
    std::string detail;
    for (int i = 0; i < 4; ++i) {
        out.require(std::abs(got[i] - expected[i]) <= metric_tolerance,
                    std::string(names[i]) + " " + fmt(got[i]) + " vs " + fmt(expected[i]));
        detail += std::string(names[i]) + "=" + fmt(got[i]) + " ";
    }
    // AUC is stored, not derived: it must pass through the metrics tool unchanged.
    gateway::App app(test_config());
    auto stored = app.minio().get_model_metrics(alice(), pipeline);
    out.require(stored.auc.has_value() && *stored.auc == auc, "stored auc did not pass through");
    out.require(stored.confusion == m, "stored confusion matrix differs");
    if (out.pass) out.detail = detail + "auc=" + fmt(*stored.auc) + " (stored)";
    return out;
}

// --- golden traces ---------------------------------------------------------

struct TurnRun {
    std::vector<orch::TurnEvent> events;
    orch::TurnTrace trace;
    std::string session_id;
};

TurnRun run_scripted(gateway::App& app, const UserContext& user, const std::string& text) {
    TurnRun r;
    r.session_id = app.sessions().create_session(user).session_id;
    r.trace = app.orchestrator().run_turn(r.session_id, text, [&](const orch::TurnEvent& e) { r.events.push_back(e); });
    return r;
}

/// Event names without streamed tokens.
std::vector<std::string> structural(const std::vector<orch::TurnEvent>& events) {
    std::vector<std::string> out;
    for (const auto& n : event_names(events))
        if (n != "token") out.push_back(n);
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

template <class T>
std::vector<const T*> all_of_type(const std::vector<orch::TurnEvent>& events) {
    std::vector<const T*> out;
    for (const auto& e : events)
        if (const auto* p = std::get_if<T>(&e)) out.push_back(p);
    return out;
}

bool contains(const std::string& hay, std::string_view needle) { return hay.find(needle) != std::string::npos; }

Outcome golden_va() {
    Outcome out;
    gateway::App app(test_config("list_pipelines.json"));
    auto r = run_scripted(app, alice(), "What ML pipelines are currently available?");
    auto shape = structural(r.events);
    out.require(shape == std::vector<std::string>{"tool_call", "tool_result", "final"}, "event shape " + join(shape));
    if (!out.pass) return out;
    auto calls = all_of_type<orch::ToolCallStarted>(r.events);
    auto results = all_of_type<orch::ToolResultEvent>(r.events);
    auto finals = all_of_type<orch::FinalEvent>(r.events);
    out.require(calls[0]->call.name == "get_pipelines", "first call is " + calls[0]->call.name);
    const auto& content = results[0]->result.content;
    out.require(results[0]->result.status == orch::ResultStatus::ok, "get_pipelines failed");
    out.require(content.value("total_pipelines", -1) == 2, "total_pipelines = " + content.value("total_pipelines", json()).dump());
    std::set<std::string> names;
    for (const auto& p : content.value("pipelines", json::array())) names.insert(p["name"].get<std::string>());
    out.require(names == std::set<std::string>{std::string(svm_pipeline), std::string(dt_pipeline)}, "pipeline names differ");
    out.require(contains(finals[0]->message, svm_pipeline) && contains(finals[0]->message, dt_pipeline),
                "final does not name both pipelines");
    out.require(!trace_violation(r.trace), "trace pairing violated");
    if (out.pass) out.detail = "tool_call get_pipelines -> total_pipelines=2 -> final names both";
    return out;
}

Outcome golden_vb() {
    Outcome out;
    gateway::App app(test_config("pipeline_defaults.json"));
    auto r = run_scripted(app, alice(), "What are the default parameters of the SVM pipeline?");
    auto shape = structural(r.events);
    out.require(shape == std::vector<std::string>{"tool_call", "tool_result", "tool_call", "tool_result", "final"},
                "event shape " + join(shape));
    if (!out.pass) return out;
    auto calls = all_of_type<orch::ToolCallStarted>(r.events);
    auto results = all_of_type<orch::ToolResultEvent>(r.events);
    auto final = all_of_type<orch::FinalEvent>(r.events)[0];
    out.require(calls[0]->call.name == "get_pipeline_details" && calls[1]->call.name == "get_pipeline_version_details",
                "tool order " + calls[0]->call.name + "," + calls[1]->call.name);
    out.require(final->iterations == 3 && r.trace.iterations == 3, "iterations = " + std::to_string(final->iterations));
    for (const auto* res : results) out.require(res->result.status == orch::ResultStatus::ok, res->name + " failed");
    // Defaults come from the stored spec, not only from the scripted text.
    const auto params = results[1]->result.content.value("pipeline_parameters", json::object());
    auto def = [&](const char* n) { return params.contains(n) ? params[n].value("defaultValue", json()) : json(); };
    out.require(def("test_size") == json(0.3) && def("random_state") == json(42) && def("svm_C") == json(1.0) &&
                    def("svm_kernel") == json("rbf"),
                "version details defaults " + params.dump());
    for (auto needle : {"test_size: 0.3", "random_state: 42", "svm_C: 1.0", "svm_kernel: rbf"})
        out.require(contains(final->message, needle), std::string("final lacks ") + needle);
    if (out.pass) out.detail = "details -> version details, 3 iterations, defaults 0.3/42/1.0/rbf";
    return out;
}

Outcome golden_vc() {
    Outcome out;
    CallRecorder recorder(milliseconds(100));
    gateway::AppHooks hooks;
    hooks.wrap_tool = recorder.wrapper();
    gateway::App app(test_config("compare_models.json"), hooks);
    auto r = run_scripted(app, alice(), "Please compare the SVM and decision tree models.");
    auto shape = structural(r.events);
    out.require(shape == std::vector<std::string>{"tool_call", "tool_result", "tool_call", "tool_call", "tool_result",
                                                  "tool_result", "final"},
                "event shape " + join(shape));
    if (!out.pass) return out;
    auto calls = all_of_type<orch::ToolCallStarted>(r.events);
    out.require(calls[0]->call.name == "list_user_buckets", "first call " + calls[0]->call.name);
    out.require(calls[1]->call.name == "get_model_metrics" && calls[2]->call.name == "get_model_metrics",
                "second batch is not two get_model_metrics calls");

    // Batch size from the persisted history: one assistant message carrying both calls.
    auto history = app.sessions().get_history(r.session_id, "alice");
    std::size_t batch = 0;
    for (const auto& m : *history) {
        std::size_t n = 0;
        for (const auto& c : m.tool_calls) n += c.name == "get_model_metrics";
        batch = std::max(batch, n);
    }
    out.require(batch == 2, "batch size " + std::to_string(batch));

    std::vector<CallRecorder::Interval> metric_calls;
    for (const auto& iv : recorder.intervals())
        if (iv.tool == "get_model_metrics") metric_calls.push_back(iv);
    out.require(metric_calls.size() == 2 && overlaps(metric_calls[0], metric_calls[1]),
                "get_model_metrics calls did not overlap");

    auto results = all_of_type<orch::ToolResultEvent>(r.events);
    std::map<std::string, json> by_pipeline;
    for (const auto* res : results)
        if (res->name == "get_model_metrics")
            by_pipeline[res->result.content["source"]["pipeline_name"].get<std::string>()] = res->result.content;
    out.require(by_pipeline.contains(std::string(svm_pipeline)) && by_pipeline.contains(std::string(dt_pipeline)),
                "metric results for " + json(results.size()).dump() + " results: " + results.back()->result.content.dump());
    if (!out.pass) return out;
    auto svm = by_pipeline[std::string(svm_pipeline)];
    auto dt = by_pipeline[std::string(dt_pipeline)];
    out.require(svm["confusion_matrix"] == json::parse("[[49,18],[15,51]]"), "svm matrix " + svm["confusion_matrix"].dump());
    out.require(dt["confusion_matrix"] == json::parse("[[77,34],[31,79]]"), "dt matrix " + dt["confusion_matrix"].dump());
    const auto& final = all_of_type<orch::FinalEvent>(r.events)[0]->message;
    for (auto needle : {"0.752", "0.739", "0.773", "0.756", "0.842", "0.706", "0.699", "0.718", "0.709", "0.708",
                        "[[49, 18], [15, 51]]", "[[77, 34], [31, 79]]"})
        out.require(contains(final, needle), std::string("final lacks ") + needle);
    if (out.pass) {
        auto overlap_ms = std::chrono::duration<double, std::milli>(
                              std::min(metric_calls[0].end, metric_calls[1].end) -
                              std::max(metric_calls[0].start, metric_calls[1].start))
                              .count();
        out.detail = "buckets -> batch of 2 metrics calls overlapping " + fmt(overlap_ms) + " ms -> final with both sets";
    }
    return out;
}

Outcome self_correction() {
    Outcome out;
    gateway::App app(test_config("run_with_correction.json"));
    auto r = run_scripted(app, alice(), "Please run the SVM pipeline with a high C value.");
    auto shape = structural(r.events);
    out.require(shape == std::vector<std::string>{"tool_call", "tool_result", "tool_call", "tool_result", "final"},
                "event shape " + join(shape));
    if (!out.pass) return out;
    auto calls = all_of_type<orch::ToolCallStarted>(r.events);
    auto results = all_of_type<orch::ToolResultEvent>(r.events);
    out.require(calls[0]->call.arguments["params"]["svm_C"] == "high", "first attempt did not send svm_C:\"high\"");
    out.require(results[0]->result.status == orch::ResultStatus::error, "first attempt did not fail");
    auto env = ErrorEnvelope::from_json(results[0]->result.content);
    out.require(env.error_type == ErrorType::invalid_argument && env.retryable, "envelope " + env.to_json().dump());
    out.require(env.details.value("parameter", "") == "svm_C", "envelope does not name svm_C");
    out.require(calls[1]->call.arguments["params"]["svm_C"] == 1.0, "retry did not send svm_C:1.0");
    out.require(results[1]->result.status == orch::ResultStatus::ok, "retry failed");
    if (!out.pass) return out;
    auto run_id = results[1]->result.content.value("run_id", "");
    auto run = app.fake_pipelines()->get_run(run_id);
    out.require(run && run->state == kfp::RunState::pending, "backend run is not PENDING");
    out.require(results[1]->result.content.value("state", "") == "PENDING", "tool result state is not PENDING");
    if (out.pass) out.detail = "INVALID_ARGUMENT(svm_C) -> retry -> run " + run_id + " PENDING";
    return out;
}

// --- retrieval -------------------------------------------------------------

std::vector<std::string> vocabulary() {
    std::vector<std::string> v;
    const char* roots[] = {"model", "pipeline", "bucket", "metric", "kernel", "tree", "split", "seed", "train",
                           "evaluate", "feature", "label", "score", "curve", "matrix", "run", "experiment", "artifact",
                           "namespace", "version"};
    for (auto r : roots)
        for (auto suffix : {"", "s", "ing"}) v.push_back(std::string(r) + suffix);
    return v;
}

std::string random_words(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t lo, std::size_t hi) {
    std::uniform_int_distribution<std::size_t> len(lo, hi), pick(0, vocab.size() - 1);
    std::string s;
    for (auto n = len(rng); n > 0; --n) s += (s.empty() ? "" : " ") + vocab[pick(rng)];
    return s;
}

Outcome rag_oracle() {
    Outcome out;
    std::mt19937_64 rng(0x5eed2025);
    auto vocab = vocabulary();
    rag::HashEmbedder embedder(32);
    rag::VectorIndex index(32, embedder.id());

    // 40 documents x 5 chunks; every 13th chunk repeats its predecessor's text so exact ties occur.
    std::vector<rag::Chunk> all;
    std::string previous;
    for (int d = 0; d < 40; ++d) {
        auto title = "doc-" + std::to_string(d);
        std::vector<rag::Chunk> chunks;
        std::vector<rag::Vector> vectors;
        for (std::uint32_t o = 0; o < 5; ++o) {
            auto text = (all.size() % 13 == 12) ? previous : random_words(rng, vocab, 4, 14);
            previous = text;
            chunks.push_back({rag::chunk_id_for(title, o, text), title, text, o});
            vectors.push_back(embedder.embed(text));
            all.push_back(chunks.back());
        }
        index.upsert_document(title, chunks, vectors);
    }
    out.require(index.size() == 200, "index holds " + std::to_string(index.size()));

    std::size_t ties = 0;
    for (int q = 0; q < 50; ++q) {
        auto query = q % 10 == 9 ? all[static_cast<std::size_t>(q * 3)].text : random_words(rng, vocab, 2, 8);
        auto qv = embedder.embed(query);
        auto got = index.retrieve(qv, 5);

        std::vector<rag::Retrieval> expect;
        for (const auto& c : all) {
            auto cv = embedder.embed(c.text);
            double s = 0;
            for (std::size_t i = 0; i < qv.size(); ++i) s += qv[i] * cv[i];
            expect.push_back({c, s});
        }
        std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.chunk.doc_title != b.chunk.doc_title) return a.chunk.doc_title < b.chunk.doc_title;
            return a.chunk.ordinal < b.chunk.ordinal;
        });
        for (std::size_t i = 0; i + 1 < expect.size(); ++i) ties += expect[i].score == expect[i + 1].score && i < 5;
        expect.resize(5);

        out.require(got.size() == 5, "query " + std::to_string(q) + " returned " + std::to_string(got.size()));
        for (std::size_t i = 0; i < got.size() && out.pass; ++i) {
            out.require(got[i].chunk.chunk_id == expect[i].chunk.chunk_id,
                        "query " + std::to_string(q) + " rank " + std::to_string(i) + " differs");
            out.require(std::abs(got[i].score - expect[i].score) <= score_tolerance,
                        "query " + std::to_string(q) + " score differs at rank " + std::to_string(i));
        }
        if (!out.pass) return out;
    }
    out.detail = "200 chunks, 50 queries, top-5 identical; " + std::to_string(ties) + " tied ranks exercised";
    return out;
}

std::string synthetic_document(std::mt19937_64& rng, const std::vector<std::string>& vocab) {
    std::uniform_int_distribution<int> topics(2, 5), per_topic(2, 9), ws(0, 9);
    std::string body;
    for (int t = topics(rng); t > 0; --t) {
        // Each topic draws from its own slice of the vocabulary.
        std::uniform_int_distribution<std::size_t> start(0, vocab.size() - 12);
        auto s0 = start(rng);
        std::vector<std::string> slice(vocab.begin() + static_cast<std::ptrdiff_t>(s0),
                                       vocab.begin() + static_cast<std::ptrdiff_t>(s0 + 12));
        for (int s = per_topic(rng); s > 0; --s) {
            auto sentence = random_words(rng, slice, 3, 12);
            sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
            if (ws(rng) == 0) sentence += ", e.g. the pipeline";
            body += sentence + (ws(rng) == 1 ? "?" : ".");
            body += ws(rng) < 2 ? "\n\n  " : " ";
        }
    }
    return body;
}

Outcome chunk_properties() {
    Outcome out;
    std::mt19937_64 rng(0xc4a9c);
    auto vocab = vocabulary();
    rag::HashEmbedder embedder(32);
    std::size_t chunks_total = 0, docs_multi = 0;
    for (int d = 0; d < 50 && out.pass; ++d) {
        rag::SourceDocument doc{"synthetic-" + std::to_string(d), synthetic_document(rng, vocab), {}};
        auto chunks = rag::chunk_document(doc, embedder);
        std::string rebuilt;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            out.require(chunks[i].ordinal == i, "ordinals not contiguous in " + doc.title);
            out.require(!chunks[i].text.empty(), "empty chunk in " + doc.title);
            if (!rebuilt.empty()) rebuilt += rag::sentence_separator;
            rebuilt += chunks[i].text;
            auto v = embedder.embed(chunks[i].text);
            out.require(std::abs(rag::l2_norm(v) - 1.0) <= norm_tolerance, "non-unit vector in " + doc.title);
        }
        out.require(rebuilt == rag::normalize_text(doc.body), "reconstruction differs for " + doc.title);
        chunks_total += chunks.size();
        docs_multi += chunks.size() > 1;
    }
    if (out.pass)
        out.detail = "50/50 documents reconstructed, " + std::to_string(chunks_total) + " chunks unit-norm, " +
                     std::to_string(docs_multi) + " documents split";
    return out;
}

// --- run-state machine -----------------------------------------------------

json state_machine_fixture() {
    json spec = json::parse(R"({
      "components": {"comp-ingest": {}, "comp-fit": {}, "comp-score": {}},
      "root": {"dag": {"tasks": {
        "ingest": {"componentRef": {"name": "comp-ingest"}},
        "fit": {"componentRef": {"name": "comp-fit"}, "dependentTasks": ["ingest"]},
        "score": {"componentRef": {"name": "comp-score"}, "dependentTasks": ["fit"]}}}}})");
    return {{"pipelines",
             {{{"id", "p-sm"},
               {"name", "state-machine-pipeline"},
               {"namespace", "team-a"},
               {"created_at", "2025-04-01T00:00:00Z"},
               {"versions", {{{"version_id", "v-sm"}, {"created_at", "2025-04-01T00:00:00Z"}, {"pipeline_spec", spec}}}}}}},
            {"experiments",
             {{{"id", "e-sm"}, {"name", "sm"}, {"namespace", "team-a"}, {"created_at", "2025-04-01T00:00:00Z"}}}}};
}

Outcome state_machine() {
    Outcome out;
    auto fixture = state_machine_fixture();
    std::size_t transitions = 0, failed = 0, succeeded = 0, rejected_faults = 0;
    for (int schedule = 0; schedule < 1000 && out.pass; ++schedule) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(schedule) * 7919 + 1);
        minio::MemoryObjectStore store;
        kfp::FakePipelineBackend backend(&store);
        backend.seed(fixture);
        std::string violation;
        backend.set_transition_observer([&](const kfp::Run& run, kfp::RunState from) {
            ++transitions;
            if (!kfp::legal_transition(from, run.state) && violation.empty())
                violation = run.run_id + ": " + std::string(to_string(from)) + "->" + std::string(to_string(run.state));
        });
        std::vector<std::string> runs;
        std::map<std::string, int> ticks_seen;
        std::map<std::string, std::string> fault_step;
        auto all_terminal = [&] {
            return std::all_of(runs.begin(), runs.end(), [&](const auto& id) { return is_terminal(backend.get_run(id)->state); });
        };
        for (int guard = 0; (runs.size() < 20 || !all_terminal()) && guard < 500; ++guard) {
            auto action = rng() % 5;
            if (runs.size() < 20 && action <= 1) {
                auto run = backend.create_run({"e-sm", "job", "p-sm", "v-sm", json::object(), "team-a"});
                runs.push_back(run.run_id);
                ticks_seen[run.run_id] = 0;
            } else if (action == 2 && !runs.empty()) {
                const auto& id = runs[rng() % runs.size()];
                auto steps = backend.run_steps(id);
                auto step = steps[rng() % steps.size()];
                bool terminal = is_terminal(backend.get_run(id)->state);
                try {
                    backend.fault_inject(id, step, "injected failure #" + std::to_string(schedule));
                    if (terminal) violation = "fault accepted on terminal run " + id;
                    fault_step[id] = step;
                } catch (const ToolError& e) {
                    ++rejected_faults;
                    if (!terminal || e.kind() != ErrorType::invalid_argument) violation = "fault rejected on live run " + id;
                }
            } else {
                backend.tick(1);
                for (auto& [id, n] : ticks_seen)
                    if (++n >= 2 && !is_terminal(backend.get_run(id)->state) && violation.empty())
                        violation = id + " not terminal after " + std::to_string(n) + " ticks";
            }
        }
        out.require(violation.empty(), "schedule " + std::to_string(schedule) + ": " + violation);
        out.require(runs.size() == 20 && all_terminal(), "schedule " + std::to_string(schedule) + " did not settle");
        for (const auto& id : runs) {
            auto run = *backend.get_run(id);
            if (auto it = fault_step.find(id); it != fault_step.end()) {
                ++failed;
                out.require(run.state == kfp::RunState::failed, id + " with fault did not fail");
                out.require(run.error_detail && contains(*run.error_detail, it->second),
                            id + " error_detail does not name " + it->second);
                out.require(run.failed_step == it->second, id + " failed_step mismatch");
            } else {
                ++succeeded;
                out.require(run.state == kfp::RunState::succeeded, id + " without fault did not succeed");
            }
        }
    }
    if (out.pass)
        out.detail = "1000 schedules x 20 runs, " + std::to_string(transitions) + " legal transitions, " +
                     std::to_string(failed) + " FAILED naming the step, " + std::to_string(succeeded) + " SUCCEEDED, " +
                     std::to_string(rejected_faults) + " late faults rejected";
    return out;
}

// --- isolation -------------------------------------------------------------

struct ForeignCall {
    std::string tool;
    json args;
    UserContext ctx;
};

/// Every tenant-scoped tool invoked with a context that must not reach the target.
std::vector<ForeignCall> foreign_calls(const std::string& alice_artifact_run) {
    const std::string churn = "a1c0e5d4-3b2a-4f19-8e7d-6c5b4a3f2e10";
    return {
        {"get_pipelines", {{"namespace", "team-a"}}, bob()},
        {"get_pipeline_details", {{"pipeline_id", churn}}, bob()},
        {"get_pipeline_version_details", {{"pipeline_id", churn}}, bob()},
        {"get_pipeline_id", {{"name", "churn-logreg-pipeline"}, {"namespace", "team-a"}}, bob()},
        {"create_experiment", {{"name", "intrusion"}, {"namespace", "team-a"}}, bob()},
        {"create_experiment", {{"name", "intrusion"}, {"namespace", "shared"}}, bob()},
        {"run_pipeline",
         {{"experiment_id", "exp-team-a-default"}, {"job_name", "x"}, {"pipeline_id", std::string(svm_pipeline_id)}},
         bob()},
        {"list_runs", {{"namespace", "team-a"}}, bob()},
        {"get_run_details", {{"run_id", "run-churn-20250419"}}, bob()},
        {"get_minio_info", {{"bucket", "team-a-data"}}, bob()},
        {"get_minio_info", {{"bucket", "mlpipeline"}}, mallory()},
        {"get_pipeline_artifacts", {{"pipeline_name", std::string(svm_pipeline)}}, mallory()},
        {"get_model_metrics", {{"pipeline_name", std::string(svm_pipeline)}}, mallory()},
        {"get_pipeline_visualization", {{"pipeline_name", std::string(svm_pipeline)}, {"viz_name", "roc_curve"}}, mallory()},
        {"get_model_metrics", {{"pipeline_name", "churn-logreg-pipeline"}, {"run_id", alice_artifact_run}}, bob()},
    };
}

Outcome isolation() {
    Outcome out;
    gateway::AppHooks hooks;
    hooks.provider = std::make_shared<EchoProvider>();
    gateway::App app(test_config(), hooks);

    // A finished team-a run with artifacts, visible to alice only.
    auto* fake = app.fake_pipelines();
    fake->tick(2);
    std::size_t agent_checks = 0;

    // 1. Agent operations with foreign contexts.
    for (const auto& fc : foreign_calls("run-churn-20250419")) {
        llm::ToolCall call{"iso-" + std::to_string(agent_checks), fc.tool, fc.args};
        auto results = orch::dispatch_batch(app.registry(), std::span(&call, 1), fc.ctx);
        const auto& res = results.at(0);
        bool rejected = res.status == orch::ResultStatus::error &&
                        (ErrorEnvelope::from_json(res.content).error_type == ErrorType::permission_denied ||
                         ErrorEnvelope::from_json(res.content).error_type == ErrorType::not_found);
        out.require(rejected, fc.tool + " as " + fc.ctx.user_id + " was not rejected: " + res.content.dump().substr(0, 200));
        ++agent_checks;
    }
    // Listing operations filter instead of failing: nothing foreign may appear.
    {
        auto buckets = app.registry().find("list_user_buckets")->handler(json::object(), bob());
        for (const auto& b : buckets["buckets"])
            out.require(bob().can_access_bucket(b["name"]), "bob sees bucket " + b["name"].dump());
        auto none = app.registry().find("list_user_buckets")->handler(json::object(), mallory());
        out.require(none["buckets"].empty(), "mallory sees buckets");
        auto pipelines = app.kfp().get_pipelines(bob(), "", std::nullopt, {});
        for (const auto& p : pipelines["pipelines"]) out.require(p["namespace"] == "team-b", "bob sees " + p.dump());
        auto runs = app.kfp().list_runs(bob(), {}, {});
        for (const auto& r : runs["runs"]) out.require(r["namespace"] != "team-a", "bob sees run " + r.dump());
        agent_checks += 4;
    }
    if (!out.pass) return out;

    // 2. HTTP routes.
    gateway::GatewayServer server(app);
    int port = server.bind("127.0.0.1", 0);
    out.require(port > 0, "bind failed");
    if (!out.pass) return out;
    std::thread serving([&] { server.serve(); });
    struct Stop {
        gateway::GatewayServer& s;
        std::thread& t;
        ~Stop() {
            s.stop();
            t.join();
        }
    } stop{server, serving};

    auto client = [&](std::string_view token) {
        auto c = std::make_unique<httplib::Client>("127.0.0.1", port);
        c->set_read_timeout(30, 0);
        if (!token.empty()) c->set_bearer_token_auth(std::string(token));
        return c;
    };
    auto alice_http = client(alice_token);
    auto created = alice_http->Post("/api/sessions");
    out.require(created && created->status == 201, "alice cannot create a session");
    if (!out.pass) return out;
    auto alice_session = json::parse(created->body)["session_id"].get<std::string>();
    auto handle = app.minio().get_pipeline_visualization(alice(), std::string(svm_pipeline), "roc_curve");
    auto artifact = "/api/artifacts/" + handle["handle"]["token"].get<std::string>();
    auto sessions_before = app.sessions().list_sessions("alice").size();

    std::size_t route_checks = 0;
    for (std::string_view token : {std::string_view{}, std::string_view{"tok-nobody"}}) {
        auto c = client(token);
        auto expect = [&](const httplib::Result& r, int status, const std::string& what) {
            ++route_checks;
            out.require(r && r->status == status,
                        what + " -> " + (r ? std::to_string(r->status) : "no response") + ", want " + std::to_string(status));
        };
        expect(c->Post("/api/sessions"), 401, "POST /api/sessions unauthenticated");
        expect(c->Get("/api/sessions"), 401, "GET /api/sessions unauthenticated");
        expect(c->Get("/api/sessions/" + alice_session + "/history"), 401, "GET history unauthenticated");
        expect(c->Post("/api/sessions/" + alice_session + "/messages", R"({"text":"hi"})", "application/json"), 401,
               "POST messages unauthenticated");
        expect(c->Get(artifact), 401, "GET artifact unauthenticated");
    }
    out.require(app.sessions().list_sessions("alice").size() == sessions_before, "unauthenticated request created a session");
    out.require(app.sessions().get_history(alice_session, "alice")->empty(), "unauthenticated request appended messages");

    auto bob_http = client(bob_token);
    auto mallory_http = client(mallory_token);
    auto expect = [&](const httplib::Result& r, int status, const std::string& what) {
        ++route_checks;
        out.require(r && r->status == status,
                    what + " -> " + (r ? std::to_string(r->status) : "no response") + ", want " + std::to_string(status));
    };
    expect(bob_http->Get("/api/sessions/" + alice_session + "/history"), 403, "bob reads alice's history");
    expect(bob_http->Post("/api/sessions/" + alice_session + "/messages", R"({"text":"hi"})", "application/json"), 403,
           "bob posts into alice's session");
    expect(bob_http->Get(artifact), 403, "bob fetches alice's artifact");
    expect(mallory_http->Get(artifact), 403, "mallory fetches alice's artifact");
    expect(alice_http->Get(artifact), 200, "alice fetches her artifact");
    auto bob_list = bob_http->Get("/api/sessions");
    ++route_checks;
    out.require(bob_list && json::parse(bob_list->body)["sessions"].empty(), "bob's session list shows foreign sessions");
    out.require(app.sessions().get_history(alice_session, "alice")->empty(), "foreign request appended messages");
    if (!out.pass) return out;

    // 3. 10 concurrent sessions x 100 interleaved turns.
    constexpr int sessions = 10, turns = 100;
    std::vector<std::string> ids(sessions);
    std::vector<UserContext> owners(sessions);
    std::vector<std::string> tokens(sessions);
    for (int s = 0; s < sessions; ++s) {
        tokens[s] = std::string(s % 2 ? bob_token : alice_token);
        owners[s] = s % 2 ? bob() : alice();
        auto r = client(tokens[s])->Post("/api/sessions");
        ids[s] = json::parse(r->body)["session_id"].get<std::string>();
    }
    std::atomic<int> stream_errors{0};
    std::mutex err_mu;
    std::string first_error;
    std::vector<std::thread> workers;
    for (int s = 0; s < sessions; ++s) {
        workers.emplace_back([&, s] {
            auto c = client(tokens[s]);
            for (int t = 0; t < turns; ++t) {
                auto nonce = "nonce-" + std::to_string(s) + "-" + std::to_string(t);
                auto r = c->Post("/api/sessions/" + ids[s] + "/messages", json{{"text", nonce}}.dump(), "application/json");
                std::string why;
                if (!r || r->status != 200) {
                    why = "turn " + nonce + " status " + (r ? std::to_string(r->status) : "none");
                } else {
                    auto events = parse_sse(r->body);
                    if (auto v = event_grammar_violation(events)) why = "grammar: " + *v;
                    else if (events.back().first != "final" || events.back().second["message"] != "done " + nonce)
                        why = "turn " + nonce + " ended with " + events.back().second.dump();
                }
                if (!why.empty()) {
                    ++stream_errors;
                    std::lock_guard lock(err_mu);
                    if (first_error.empty()) first_error = why;
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    out.require(stream_errors == 0, std::to_string(stream_errors.load()) + " bad streams, first: " + first_error);

    std::size_t leaks = 0, messages = 0;
    for (int s = 0; s < sessions; ++s) {
        auto r = client(tokens[s])->Get("/api/sessions/" + ids[s] + "/history");
        auto history = json::parse(r->body)["messages"];
        messages += history.size();
        out.require(history.size() == static_cast<std::size_t>(turns) * 5,
                    "session " + std::to_string(s) + " has " + std::to_string(history.size()) + " messages");
        auto own = "nonce-" + std::to_string(s) + "-";
        for (const auto& m : history) {
            auto text = m.value("content", "");
            if (m["role"] == "user" && !text.starts_with(own)) ++leaks;
            if (m["role"] == "assistant" && !text.empty() && !text.starts_with("done " + own)) ++leaks;
            if (m["role"] != "tool") continue;
            auto record = json::parse(text);
            const auto& content = record["content"];
            if (content.contains("buckets"))
                for (const auto& b : content["buckets"]) leaks += !owners[s].can_access_bucket(b["name"]);
            if (content.contains("pipelines"))
                for (const auto& p : content["pipelines"]) leaks += p["namespace"] != owners[s].namespace_name;
        }
        auto foreign = client(tokens[(s + 1) % sessions])->Get("/api/sessions/" + ids[s] + "/history");
        leaks += !(foreign && foreign->status == 403);
    }
    out.require(leaks == 0, std::to_string(leaks) + " leaks");
    if (out.pass)
        out.detail = std::to_string(agent_checks) + " agent checks, " + std::to_string(route_checks) +
                     " route checks, " + std::to_string(sessions * turns) + " turns / " + std::to_string(messages) +
                     " messages, 0 leaks";
    return out;
}

} // namespace

int main() {
    using minio::ConfusionMatrix;
    run_check("metrics_svm", milliseconds(1000), [] {
        return metrics_row(ConfusionMatrix{{{{49, 18}, {15, 51}}}}, {0.752, 0.739, 0.773, 0.756}, 0.842,
                           std::string(svm_pipeline));
    });
    run_check("metrics_dt", milliseconds(1000), [] {
        return metrics_row(ConfusionMatrix{{{{77, 34}, {31, 79}}}}, {0.706, 0.699, 0.718, 0.709}, 0.708,
                           std::string(dt_pipeline));
    });
    run_check("golden_trace_list_pipelines", milliseconds(1000), golden_va);
    run_check("golden_trace_pipeline_defaults", milliseconds(1000), golden_vb);
    run_check("golden_trace_compare_models", milliseconds(2000), golden_vc);
    run_check("self_correction", milliseconds(1000), self_correction);
    run_check("rag_topk_oracle", milliseconds(5000), rag_oracle);
    run_check("chunk_lossless_unit_norm", milliseconds(10000), chunk_properties);
    run_check("run_state_machine", milliseconds(5000), state_machine);
    run_check("isolation_sweep", milliseconds(30000), isolation);
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
