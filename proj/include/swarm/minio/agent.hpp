#pragma once

#include "swarm/minio/metrics.hpp"
#include "swarm/minio/object_store.hpp"
#include "swarm/orchestrator/tool_registry.hpp"
#include "swarm/session/user_context.hpp"

#include <chrono>
#include <map>
#include <mutex>

namespace swarm::minio {

using nlohmann::json;

enum class ArtifactKind { metrics, visualization, model, log, other };

std::string_view to_string(ArtifactKind kind);

/// Depends on the key suffix only: .json metrics, .png/.svg visualization,
/// .pkl/.bin model, .log log, anything else other.
ArtifactKind classify_artifact(std::string_view key);

struct ArtifactRef {
    ArtifactKind kind = ArtifactKind::other;
    ObjectStat stat;
    std::optional<std::string> run_id;

    json to_json() const;
};

/// Artifacts live at <bucket>/<dir>/<run_id>/<file>, where <dir> is the
/// pipeline name without a trailing "-pipeline".
std::string artifact_dir(std::string_view pipeline_name);

/// Canonical artifact file names written for every successful run.
namespace artifact_files {
inline constexpr std::string_view metrics = "metrics.json";
inline constexpr std::string_view roc_curve = "roc_curve.png";
inline constexpr std::string_view confusion_matrix = "confusion_matrix.png";
inline constexpr std::string_view model = "model.bin";
} // namespace artifact_files

/// What the pipeline backend knows about runs; the single source of run order.
struct RunInfo {
    std::string run_id;
    std::string pipeline_name;
    std::string namespace_name;
    Timestamp created_at{};
};

class RunCatalog {
public:
    virtual ~RunCatalog() = default;
    /// Runs whose pipeline maps to `dir` under artifact_dir().
    virtual std::vector<RunInfo> runs_for_artifact_dir(const std::string& dir) const = 0;
    virtual std::optional<RunInfo> find_run(const std::string& run_id) const = 0;
};

/// Short-lived download handles for stored objects, bound to the user that
/// requested them.
class PresignRegistry {
public:
    struct Handle {
        std::string token;
        std::string url;
        Timestamp expires_at{};
    };
    struct Target {
        std::string bucket;
        std::string key;
        std::string user_id;
    };

    PresignRegistry(std::string public_base_url, std::chrono::seconds ttl = std::chrono::seconds(900),
                    Clock clock = now_utc);

    Handle issue(const std::string& bucket, const std::string& key, const std::string& user_id);
    /// Null when the token is unknown or expired.
    std::optional<Target> resolve(const std::string& token) const;
    std::chrono::seconds ttl() const { return ttl_; }

private:
    std::string public_base_url_;
    std::chrono::seconds ttl_;
    Clock clock_;
    mutable std::mutex mu_;
    std::map<std::string, std::pair<Target, Timestamp>> handles_;
};

struct RunRef {
    std::string pipeline_name;
    std::optional<std::string> run_id;
};

class MinioAgent {
public:
    struct Options {
        std::string artifact_bucket = "mlpipeline";
        std::size_t default_limit = 100;
        std::size_t max_limit = 1000;
    };

    MinioAgent(ObjectStore& store, const RunCatalog* catalog, PresignRegistry& presign, Options options);
    MinioAgent(ObjectStore& store, const RunCatalog* catalog, PresignRegistry& presign)
        : MinioAgent(store, catalog, presign, Options{}) {}

    std::vector<BucketInfo> list_user_buckets(const UserContext& ctx);
    ListResult get_minio_info(const UserContext& ctx, const std::string& bucket, const std::string& prefix = {},
                              bool recursive = false, std::optional<std::size_t> limit = std::nullopt);
    std::vector<ArtifactRef> get_pipeline_artifacts(const UserContext& ctx, const std::string& pipeline_name,
                                                    const std::optional<std::string>& run_id = std::nullopt);
    ModelMetrics get_model_metrics(const UserContext& ctx, const std::string& pipeline_name,
                                   const std::optional<std::string>& run_id = std::nullopt);
    /// {artifact, handle{url, token, expires_at}, caption}
    json get_pipeline_visualization(const UserContext& ctx, const std::string& pipeline_name,
                                    const std::string& viz_name, const std::optional<std::string>& run_id = std::nullopt);
    /// Aligned metrics table with deltas against the first resolvable ref.
    /// Unresolvable refs become warnings; NOT_FOUND only when none resolve.
    json compare_runs(const UserContext& ctx, const std::vector<RunRef>& refs);

    const Options& options() const { return options_; }

private:
    void require_bucket(const UserContext& ctx, const std::string& bucket) const;
    /// Picks the run directory under `dir`, optionally requiring a file in it.
    std::string resolve_run(const UserContext& ctx, const std::string& dir, const std::optional<std::string>& run_id,
                            std::string_view required_file);
    std::vector<ObjectStat> run_objects(const std::string& dir, const std::string& run_id);

    ObjectStore& store_;
    const RunCatalog* catalog_;
    PresignRegistry& presign_;
    Options options_;
};

/// The five storage tools in their canonical order.
void register_minio_tools(orch::ToolRegistry& registry, MinioAgent& agent);

} // namespace swarm::minio
