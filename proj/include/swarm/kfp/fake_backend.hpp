#pragma once

#include "swarm/kfp/backend.hpp"
#include "swarm/minio/agent.hpp"

#include <functional>
#include <map>
#include <mutex>

namespace swarm::kfp {

/// In-memory pipeline service with an explicit run clock.
///
/// Runs only move when tick() is called: each tick advances every
/// non-terminal run one step, PENDING→RUNNING→SUCCEEDED, or →FAILED at the
/// injected step. Runs are visited in creation order and ids come from a
/// counter, so a given sequence of calls always produces the same state.
/// A successful run writes its artifacts to the object store under
/// <bucket>/<artifact_dir(pipeline)>/<run_id>/.
class FakePipelineBackend final : public PipelineBackend, public minio::RunCatalog {
public:
    struct Options {
        Timestamp clock_start = parse_timestamp("2025-04-20T00:00:00Z");
        std::chrono::milliseconds clock_step{1000};
        std::string artifact_bucket = "mlpipeline";
    };

    using TransitionObserver = std::function<void(const Run& run, RunState from)>;

    explicit FakePipelineBackend(minio::ObjectStore* artifacts = nullptr);
    FakePipelineBackend(minio::ObjectStore* artifacts, Options options);

    /// Loads pipelines, experiments, runs and stored objects from a fixture
    /// document (see fixtures/diabetes.json). Adds to existing state.
    void seed(const json& fixture);

    std::vector<Pipeline> list_pipelines(const std::string& namespace_name) override;
    std::optional<Pipeline> get_pipeline(const std::string& pipeline_id) override;
    std::vector<Experiment> list_experiments(const std::string& namespace_name) override;
    std::optional<Experiment> get_experiment(const std::string& experiment_id) override;
    Experiment create_experiment(const std::string& name, const std::string& namespace_name,
                                 const std::string& description) override;
    Run create_run(const RunRequest& request) override;
    std::vector<Run> list_runs(const std::string& namespace_name) override;
    std::optional<Run> get_run(const std::string& run_id) override;

    std::vector<minio::RunInfo> runs_for_artifact_dir(const std::string& dir) const override;
    std::optional<minio::RunInfo> find_run(const std::string& run_id) const override;

    void tick(std::size_t n = 1);
    /// The run fails at `step` on its next RUNNING→terminal tick. Throws
    /// ToolError{not_found} for an unknown run or step and
    /// ToolError{invalid_argument} for a run that already finished.
    void fault_inject(const std::string& run_id, const std::string& step, const std::string& error_text);

    void set_transition_observer(TransitionObserver observer);

    /// Step names of the run's pipeline version, in execution order.
    std::vector<std::string> run_steps(const std::string& run_id) const;

    json snapshot() const;
    void restore(const json& snapshot);

private:
    struct Fault {
        std::string step;
        std::string text;
    };

    Timestamp advance();
    std::string next_id(std::string_view prefix);
    const Pipeline* pipeline_of(const Run& run) const;
    void finish_run(Run& run);
    void write_artifacts(const Run& run, const std::optional<json>& metrics);
    minio::RunInfo info_of(const Run& run) const;

    minio::ObjectStore* artifacts_;
    Options options_;
    mutable std::recursive_mutex mu_;
    Timestamp now_;
    std::uint64_t counter_ = 0;
    std::map<std::string, Pipeline> pipelines_;
    std::vector<std::string> pipeline_order_;
    std::map<std::string, Experiment> experiments_;
    std::vector<std::string> experiment_order_;
    std::map<std::string, Run> runs_;
    std::vector<std::string> run_order_;
    std::map<std::string, Fault> faults_;
    TransitionObserver observer_;
};

/// Deterministic metrics payload (metrics.json body) for a synthesized run;
/// always consistent with its own confusion matrix.
json synthesize_metrics(const std::string& run_id, const json& params);

} // namespace swarm::kfp
