#pragma once

#include "swarm/kfp/backend.hpp"
#include "swarm/url.hpp"

#include <chrono>

namespace swarm::kfp {

/// Thin client for the Kubeflow Pipelines v2beta1 HTTP API. Lists are read
/// to exhaustion page by page; the agent paginates on top.
class KfpRestBackend final : public PipelineBackend {
public:
    KfpRestBackend(Endpoint endpoint, std::string bearer_token = {},
                   std::chrono::seconds timeout = std::chrono::seconds(30));

    std::vector<Pipeline> list_pipelines(const std::string& namespace_name) override;
    std::optional<Pipeline> get_pipeline(const std::string& pipeline_id) override;
    std::vector<Experiment> list_experiments(const std::string& namespace_name) override;
    std::optional<Experiment> get_experiment(const std::string& experiment_id) override;
    Experiment create_experiment(const std::string& name, const std::string& namespace_name,
                                 const std::string& description) override;
    Run create_run(const RunRequest& request) override;
    std::vector<Run> list_runs(const std::string& namespace_name) override;
    std::optional<Run> get_run(const std::string& run_id) override;

private:
    /// Null body on 404; other failures raise ToolError.
    std::optional<json> call(const std::string& method, const std::string& path, const json* body = nullptr);
    std::vector<json> list_all(const std::string& path, const std::string& field, const std::string& namespace_name);
    Pipeline to_pipeline(const json& j, const std::string& fallback_namespace);

    Endpoint endpoint_;
    std::string bearer_token_;
    std::chrono::seconds timeout_;
};

/// v2beta1 run state onto the four-state machine: PENDING and unspecified →
/// PENDING; RUNNING, PAUSED, CANCELING → RUNNING; SUCCEEDED → SUCCEEDED;
/// everything else terminal → FAILED.
RunState run_state_from_v2beta1(std::string_view state);

} // namespace swarm::kfp
