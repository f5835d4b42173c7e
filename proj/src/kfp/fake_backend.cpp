#include "swarm/kfp/fake_backend.hpp"

#include "swarm/base64.hpp"
#include "swarm/ids.hpp"
#include "swarm/minio/metrics.hpp"
#include "swarm/orchestrator/error_envelope.hpp"

#include <algorithm>
#include <cmath>

namespace swarm::kfp {

namespace {

// 1x1 transparent PNG standing in for rendered plots.
constexpr std::string_view placeholder_png_b64 =
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==";

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

} // namespace

json synthesize_metrics(const std::string& run_id, const json& params) {
    auto h = fnv1a64(run_id + "|" + params.dump());
    minio::ConfusionMatrix m;
    m.cells = {{{40 + h % 25, 8 + (h >> 8) % 15}, {8 + (h >> 16) % 15, 40 + (h >> 24) % 25}}};
    auto d = minio::compute_metrics_from_confusion(m);
    double auc = std::min(0.99, d.accuracy + 0.03 + static_cast<double>((h >> 32) % 60) / 1000.0);
    return {{"accuracy", round4(d.accuracy)},
            {"precision", round4(d.precision)},
            {"recall", round4(d.recall)},
            {"f1", round4(d.f1)},
            {"auc", round4(auc)},
            {"confusion_matrix", minio::to_json(m)}};
}

FakePipelineBackend::FakePipelineBackend(minio::ObjectStore* artifacts) : FakePipelineBackend(artifacts, Options{}) {}

FakePipelineBackend::FakePipelineBackend(minio::ObjectStore* artifacts, Options options)
    : artifacts_(artifacts), options_(std::move(options)), now_(options_.clock_start) {}

Timestamp FakePipelineBackend::advance() {
    now_ += options_.clock_step;
    return now_;
}

std::string FakePipelineBackend::next_id(std::string_view prefix) {
    auto h = fnv1a64(std::to_string(++counter_), fnv1a64(prefix));
    return std::string(prefix) + "-" + hex64(h).substr(0, 12);
}

void FakePipelineBackend::seed(const json& fixture) {
    std::lock_guard lock(mu_);
    if (fixture.contains("clock_start")) now_ = parse_timestamp(fixture["clock_start"].get<std::string>());
    if (artifacts_) {
        for (const auto& b : fixture.value("buckets", json::array())) artifacts_->create_bucket(b.get<std::string>());
        if (!artifacts_->bucket_exists(options_.artifact_bucket)) artifacts_->create_bucket(options_.artifact_bucket);
        for (const auto& o : fixture.value("objects", json::array())) {
            auto body = o.contains("base64") ? base64_decode(o["base64"].get<std::string>())
                                             : o.at("text").get<std::string>();
            artifacts_->put_object(o.at("bucket").get<std::string>(), o.at("key").get<std::string>(), std::move(body),
                                   o.value("content_type", "application/octet-stream"));
        }
    }
    for (const auto& p : fixture.value("pipelines", json::array())) {
        auto pipeline = pipeline_from_json(p);
        if (pipelines_.contains(pipeline.id)) throw std::invalid_argument("duplicate pipeline id " + pipeline.id);
        pipeline_order_.push_back(pipeline.id);
        pipelines_.emplace(pipeline.id, std::move(pipeline));
    }
    for (const auto& e : fixture.value("experiments", json::array())) {
        auto exp = experiment_from_json(e);
        experiment_order_.push_back(exp.id);
        experiments_.emplace(exp.id, std::move(exp));
    }
    for (const auto& r : fixture.value("runs", json::array())) {
        auto run = run_from_json(r);
        if (!pipelines_.contains(run.pipeline_id)) throw std::invalid_argument("run " + run.run_id + ": unknown pipeline");
        run_order_.push_back(run.run_id);
        auto& stored = runs_.emplace(run.run_id, std::move(run)).first->second;
        if (stored.state == RunState::succeeded) {
            std::optional<json> metrics;
            if (r.contains("metrics")) metrics = r["metrics"];
            write_artifacts(stored, metrics);
        } else if (stored.state == RunState::failed) {
            write_artifacts(stored, std::nullopt);
        }
    }
}

std::vector<Pipeline> FakePipelineBackend::list_pipelines(const std::string& namespace_name) {
    std::lock_guard lock(mu_);
    std::vector<Pipeline> out;
    for (const auto& id : pipeline_order_)
        if (pipelines_.at(id).namespace_name == namespace_name) out.push_back(pipelines_.at(id));
    return out;
}

std::optional<Pipeline> FakePipelineBackend::get_pipeline(const std::string& pipeline_id) {
    std::lock_guard lock(mu_);
    auto it = pipelines_.find(pipeline_id);
    if (it == pipelines_.end()) return std::nullopt;
    return it->second;
}

std::vector<Experiment> FakePipelineBackend::list_experiments(const std::string& namespace_name) {
    std::lock_guard lock(mu_);
    std::vector<Experiment> out;
    for (const auto& id : experiment_order_)
        if (experiments_.at(id).namespace_name == namespace_name) out.push_back(experiments_.at(id));
    return out;
}

std::optional<Experiment> FakePipelineBackend::get_experiment(const std::string& experiment_id) {
    std::lock_guard lock(mu_);
    auto it = experiments_.find(experiment_id);
    if (it == experiments_.end()) return std::nullopt;
    return it->second;
}

Experiment FakePipelineBackend::create_experiment(const std::string& name, const std::string& namespace_name,
                                                  const std::string& description) {
    std::lock_guard lock(mu_);
    for (const auto& [id, e] : experiments_)
        if (e.name == name && e.namespace_name == namespace_name)
            throw ToolError(ErrorType::invalid_argument,
                            "experiment '" + name + "' already exists in namespace " + namespace_name,
                            {{"parameter", "name"}, {"existing_id", id}});
    Experiment exp{next_id("exp"), name, namespace_name, description, advance()};
    experiment_order_.push_back(exp.id);
    experiments_.emplace(exp.id, exp);
    return exp;
}

Run FakePipelineBackend::create_run(const RunRequest& request) {
    std::lock_guard lock(mu_);
    if (!experiments_.contains(request.experiment_id))
        throw ToolError(ErrorType::not_found, "no experiment " + request.experiment_id);
    auto p = pipelines_.find(request.pipeline_id);
    if (p == pipelines_.end() || !p->second.find_version(request.version_id))
        throw ToolError(ErrorType::not_found, "no pipeline version " + request.pipeline_id + "/" + request.version_id);
    Run run;
    run.run_id = next_id("run");
    run.job_name = request.job_name;
    run.experiment_id = request.experiment_id;
    run.pipeline_id = request.pipeline_id;
    run.version_id = request.version_id;
    run.namespace_name = request.namespace_name;
    run.params = request.params;
    run.state = RunState::pending;
    run.created_at = advance();
    run_order_.push_back(run.run_id);
    runs_.emplace(run.run_id, run);
    return run;
}

std::vector<Run> FakePipelineBackend::list_runs(const std::string& namespace_name) {
    std::lock_guard lock(mu_);
    std::vector<Run> out;
    for (const auto& id : run_order_)
        if (runs_.at(id).namespace_name == namespace_name) out.push_back(runs_.at(id));
    return out;
}

std::optional<Run> FakePipelineBackend::get_run(const std::string& run_id) {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) return std::nullopt;
    return it->second;
}

const Pipeline* FakePipelineBackend::pipeline_of(const Run& run) const {
    auto it = pipelines_.find(run.pipeline_id);
    return it == pipelines_.end() ? nullptr : &it->second;
}

minio::RunInfo FakePipelineBackend::info_of(const Run& run) const {
    const auto* p = pipeline_of(run);
    return {run.run_id, p ? p->name : std::string(), run.namespace_name, run.created_at};
}

std::vector<minio::RunInfo> FakePipelineBackend::runs_for_artifact_dir(const std::string& dir) const {
    std::lock_guard lock(mu_);
    std::vector<minio::RunInfo> out;
    for (const auto& id : run_order_) {
        const auto& run = runs_.at(id);
        const auto* p = pipeline_of(run);
        if (p && minio::artifact_dir(p->name) == dir) out.push_back(info_of(run));
    }
    return out;
}

std::optional<minio::RunInfo> FakePipelineBackend::find_run(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) return std::nullopt;
    return info_of(it->second);
}

std::vector<std::string> FakePipelineBackend::run_steps(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) return {};
    std::vector<std::string> out;
    if (const auto* p = pipeline_of(it->second))
        if (const auto* v = p->find_version(it->second.version_id))
            for (const auto& c : v->parsed.components) out.push_back(c.name);
    return out;
}

void FakePipelineBackend::tick(std::size_t n) {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& id : run_order_) {
            auto& run = runs_.at(id);
            auto from = run.state;
            if (from == RunState::pending) {
                run.state = RunState::running;
                advance();
            } else if (from == RunState::running) {
                finish_run(run);
            } else {
                continue;
            }
            if (observer_) observer_(run, from);
        }
    }
}

void FakePipelineBackend::finish_run(Run& run) {
    run.finished_at = advance();
    auto fault = faults_.find(run.run_id);
    if (fault != faults_.end()) {
        run.state = RunState::failed;
        run.failed_step = fault->second.step;
        run.error_detail = "step " + fault->second.step + " failed: " + fault->second.text;
        faults_.erase(fault);
        write_artifacts(run, std::nullopt);
        return;
    }
    run.state = RunState::succeeded;
    write_artifacts(run, synthesize_metrics(run.run_id, run.params));
}

void FakePipelineBackend::write_artifacts(const Run& run, const std::optional<json>& metrics) {
    if (!artifacts_) return;
    const auto* p = pipeline_of(run);
    if (!p) return;
    const auto* v = p->find_version(run.version_id);
    auto base = minio::artifact_dir(p->name) + "/" + run.run_id + "/";
    const auto& bucket = options_.artifact_bucket;
    if (!artifacts_->bucket_exists(bucket)) artifacts_->create_bucket(bucket);

    auto stamp = format_timestamp(run.finished_at.value_or(run.created_at));
    if (v) {
        for (const auto& c : v->parsed.components) {
            std::string log = "[" + stamp + "] " + c.name + " started\n";
            if (run.failed_step && *run.failed_step == c.name) {
                log += "[" + stamp + "] ERROR " + run.error_detail.value_or("failed") + "\n";
                artifacts_->put_object(bucket, base + "step-" + c.name + ".log", std::move(log), "text/plain");
                break;
            }
            log += "[" + stamp + "] " + c.name + " completed\n";
            artifacts_->put_object(bucket, base + "step-" + c.name + ".log", std::move(log), "text/plain");
        }
    }
    if (run.state != RunState::succeeded) return;

    if (metrics) artifacts_->put_object(bucket, base + std::string(minio::artifact_files::metrics), metrics->dump(2),
                                        "application/json");
    auto png = base64_decode(placeholder_png_b64);
    artifacts_->put_object(bucket, base + std::string(minio::artifact_files::roc_curve), png, "image/png");
    artifacts_->put_object(bucket, base + std::string(minio::artifact_files::confusion_matrix), png, "image/png");
    artifacts_->put_object(bucket, base + std::string(minio::artifact_files::model),
                           "model:" + p->name + ":" + run.run_id + ":" + run.params.dump(), "application/octet-stream");
}

void FakePipelineBackend::fault_inject(const std::string& run_id, const std::string& step,
                                       const std::string& error_text) {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw ToolError(ErrorType::not_found, "no run " + run_id, {{"run_id", run_id}});
    if (is_terminal(it->second.state))
        throw ToolError(ErrorType::invalid_argument, "run " + run_id + " already finished", {{"run_id", run_id}});
    auto steps = run_steps(run_id);
    if (std::find(steps.begin(), steps.end(), step) == steps.end())
        throw ToolError(ErrorType::not_found, "run " + run_id + " has no step " + step, {{"step", step}, {"steps", steps}});
    faults_[run_id] = {step, error_text};
}

void FakePipelineBackend::set_transition_observer(TransitionObserver observer) {
    std::lock_guard lock(mu_);
    observer_ = std::move(observer);
}

json FakePipelineBackend::snapshot() const {
    std::lock_guard lock(mu_);
    json pipelines = json::array(), experiments = json::array(), runs = json::array(), faults = json::object();
    for (const auto& id : pipeline_order_) pipelines.push_back(pipeline_to_json(pipelines_.at(id)));
    for (const auto& id : experiment_order_) experiments.push_back(experiments_.at(id).to_json());
    for (const auto& id : run_order_) runs.push_back(runs_.at(id).to_json());
    for (const auto& [id, f] : faults_) faults[id] = {{"step", f.step}, {"text", f.text}};
    return {{"clock", format_timestamp(now_)},
            {"counter", counter_},
            {"pipelines", pipelines},
            {"experiments", experiments},
            {"runs", runs},
            {"faults", faults}};
}

void FakePipelineBackend::restore(const json& snapshot) {
    std::lock_guard lock(mu_);
    now_ = parse_timestamp(snapshot.at("clock").get<std::string>());
    counter_ = snapshot.at("counter").get<std::uint64_t>();
    pipelines_.clear();
    pipeline_order_.clear();
    experiments_.clear();
    experiment_order_.clear();
    runs_.clear();
    run_order_.clear();
    faults_.clear();
    for (const auto& p : snapshot.at("pipelines")) {
        auto pipeline = pipeline_from_json(p);
        pipeline_order_.push_back(pipeline.id);
        pipelines_.emplace(pipeline.id, std::move(pipeline));
    }
    for (const auto& e : snapshot.at("experiments")) {
        auto exp = experiment_from_json(e);
        experiment_order_.push_back(exp.id);
        experiments_.emplace(exp.id, std::move(exp));
    }
    for (const auto& r : snapshot.at("runs")) {
        auto run = run_from_json(r);
        run_order_.push_back(run.run_id);
        runs_.emplace(run.run_id, std::move(run));
    }
    for (const auto& [id, f] : snapshot.at("faults").items())
        faults_[id] = {f.at("step").get<std::string>(), f.at("text").get<std::string>()};
}

} // namespace swarm::kfp
