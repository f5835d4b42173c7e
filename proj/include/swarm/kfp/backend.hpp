#pragma once

#include "swarm/kfp/types.hpp"

namespace swarm::kfp {

struct RunRequest {
    std::string experiment_id;
    std::string job_name;
    std::string pipeline_id;
    std::string version_id;
    json params = json::object();  // already merged with defaults
    std::string namespace_name;
};

/// The pipeline service the agent talks to. Lookups return null for unknown
/// ids; transport failures raise ToolError{backend_unavailable}. Permission
/// checks belong to the agent, not the backend.
class PipelineBackend {
public:
    virtual ~PipelineBackend() = default;

    virtual std::vector<Pipeline> list_pipelines(const std::string& namespace_name) = 0;
    virtual std::optional<Pipeline> get_pipeline(const std::string& pipeline_id) = 0;

    virtual std::vector<Experiment> list_experiments(const std::string& namespace_name) = 0;
    virtual std::optional<Experiment> get_experiment(const std::string& experiment_id) = 0;
    virtual Experiment create_experiment(const std::string& name, const std::string& namespace_name,
                                         const std::string& description) = 0;

    virtual Run create_run(const RunRequest& request) = 0;
    virtual std::vector<Run> list_runs(const std::string& namespace_name) = 0;
    virtual std::optional<Run> get_run(const std::string& run_id) = 0;
};

} // namespace swarm::kfp
