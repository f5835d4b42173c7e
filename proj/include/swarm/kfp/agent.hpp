#pragma once

#include "swarm/kfp/backend.hpp"
#include "swarm/orchestrator/tool_registry.hpp"
#include "swarm/session/user_context.hpp"

namespace swarm::kfp {

/// Pipeline tools over a backend. Every operation checks the caller's
/// namespace first: resources in the caller's own namespace are readable and
/// writable, "shared" is readable by everyone and writable only from itself,
/// anything else is PERMISSION_DENIED.
class KfpAgent {
public:
    struct Options {
        std::size_t default_page_size = 20;
        std::size_t max_page_size = 100;
        std::string artifact_bucket = "mlpipeline";
    };

    struct PageRequest {
        std::size_t page_size = 20;
        std::optional<std::string> page_token;  // "offset:<n>" as returned in next_page_token
    };

    explicit KfpAgent(PipelineBackend& backend) : KfpAgent(backend, Options{}) {}
    KfpAgent(PipelineBackend& backend, Options options);

    /// {total_pipelines (this page), total_available (all matches), namespace,
    ///  namespace_type, pipelines, next_page_token?}
    json get_pipelines(const UserContext& ctx, const std::string& search, const std::optional<std::string>& ns,
                       PageRequest page);
    json get_pipeline_details(const UserContext& ctx, const std::string& pipeline_id);
    /// version_id omitted ⇒ the latest version.
    json get_pipeline_version_details(const UserContext& ctx, const std::string& pipeline_id,
                                      const std::optional<std::string>& version_id);
    std::string get_pipeline_id(const UserContext& ctx, const std::string& name, const std::optional<std::string>& ns);
    Experiment create_experiment(const UserContext& ctx, const std::string& name, const std::optional<std::string>& ns,
                                 const std::string& description);
    Run run_pipeline(const UserContext& ctx, const std::string& experiment_id, const std::string& job_name,
                     const json& params, const std::string& pipeline_id, const std::optional<std::string>& version_id);

    struct RunFilter {
        std::optional<std::string> ns;
        std::optional<std::string> experiment_id;
        std::optional<std::string> status;
        std::optional<std::string> search;
    };
    /// {total_available, runs, next_page_token?}, newest first.
    json list_runs(const UserContext& ctx, const RunFilter& filter, PageRequest page);
    /// Run record joined with pipeline name/version and per-step log handles.
    json get_run_details(const UserContext& ctx, const std::string& run_id);

    const Options& options() const { return options_; }

private:
    void require_readable(const UserContext& ctx, const std::string& ns) const;
    void require_writable(const UserContext& ctx, const std::string& ns) const;
    Pipeline load_pipeline(const UserContext& ctx, const std::string& pipeline_id);
    std::pair<std::size_t, std::size_t> page_window(const PageRequest& page, std::size_t total) const;

    PipelineBackend& backend_;
    Options options_;
};

/// Validates an opaque resource id: non-empty, at most 128 characters of
/// [A-Za-z0-9._-]. Throws ToolError{invalid_argument} naming `parameter`.
void require_well_formed_id(const std::string& id, std::string_view parameter);

/// The eight pipeline tools in their canonical order.
void register_kfp_tools(orch::ToolRegistry& registry, KfpAgent& agent);

} // namespace swarm::kfp
