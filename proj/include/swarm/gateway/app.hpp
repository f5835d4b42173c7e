#pragma once

#include "swarm/gateway/config.hpp"
#include "swarm/kfp/agent.hpp"
#include "swarm/kfp/fake_backend.hpp"
#include "swarm/minio/agent.hpp"
#include "swarm/orchestrator/orchestrator.hpp"
#include "swarm/rag/agent.hpp"

#include <memory>

namespace swarm::gateway {

/// Files under a data directory.
struct DataLayout {
    std::filesystem::path root;

    std::filesystem::path sessions() const { return root; }
    std::filesystem::path traces() const { return root / "traces"; }
    std::filesystem::path pipelines_state() const { return root / "state" / "pipelines.json"; }
    std::filesystem::path objects_state() const { return root / "state" / "objects.json"; }
    std::filesystem::path index() const { return root / "index.bin"; }
};

/// Writes `j` through a temp file and rename.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Fake backend state kept in a data directory between processes.
struct FakeState {
    minio::MemoryObjectStore objects;
    kfp::FakePipelineBackend pipelines;

    FakeState();
    /// True when a saved state was found and restored.
    bool load(const DataLayout& layout);
    void save(const DataLayout& layout) const;
};

struct AppHooks {
    /// Replaces the provider selected by config.
    std::shared_ptr<llm::LlmProvider> provider;
    /// Applied to every registered tool handler.
    std::function<orch::ToolHandler(const llm::ToolDescriptor&, orch::ToolHandler)> wrap_tool;
};

/// The composed service: backends, agents, tool registry, session store and
/// orchestrator, wired from one GatewayConfig.
class App {
public:
    explicit App(GatewayConfig config, AppHooks hooks = {});
    ~App();

    App(const App&) = delete;
    App& operator=(const App&) = delete;

    /// Null for an unknown token.
    const UserContext* authenticate(std::string_view token) const;

    const GatewayConfig& config() const { return config_; }
    session::SessionStore& sessions() { return *sessions_; }
    orch::ToolRegistry& registry() { return registry_; }
    orch::Orchestrator& orchestrator() { return *orchestrator_; }
    minio::ObjectStore& objects() { return *objects_; }
    minio::PresignRegistry& presign() { return presign_; }
    kfp::KfpAgent& kfp() { return *kfp_agent_; }
    minio::MinioAgent& minio() { return *minio_agent_; }
    rag::RagAgent& rag() { return *rag_agent_; }
    /// Null unless the fake pipeline backend is configured.
    kfp::FakePipelineBackend* fake_pipelines() { return fake_pipelines_; }

    /// Saves fake backend state to the data directory, if any.
    void persist();

private:
    GatewayConfig config_;
    std::optional<DataLayout> layout_;
    std::unique_ptr<FakeState> fake_;
    std::unique_ptr<minio::ObjectStore> owned_objects_;
    std::unique_ptr<kfp::PipelineBackend> owned_pipelines_;
    minio::ObjectStore* objects_ = nullptr;
    kfp::PipelineBackend* pipelines_ = nullptr;
    kfp::FakePipelineBackend* fake_pipelines_ = nullptr;
    minio::PresignRegistry presign_;
    std::unique_ptr<rag::Embedder> embedder_;
    std::unique_ptr<rag::VectorIndex> index_;
    std::unique_ptr<kfp::KfpAgent> kfp_agent_;
    std::unique_ptr<minio::MinioAgent> minio_agent_;
    std::unique_ptr<rag::RagAgent> rag_agent_;
    orch::ToolRegistry registry_;
    std::unique_ptr<session::SessionStore> sessions_;
    std::shared_ptr<llm::LlmProvider> provider_;
    std::unique_ptr<orch::Orchestrator> orchestrator_;
    std::mutex persist_mu_;
};

/// Embedder selected by config; the http kind reads its API key from the environment.
std::unique_ptr<rag::Embedder> make_embedder(const EmbedderConfig& config);

} // namespace swarm::gateway
