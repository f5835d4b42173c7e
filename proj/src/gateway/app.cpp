#include "swarm/gateway/app.hpp"

#include "swarm/kfp/rest_backend.hpp"
#include "swarm/llm/openai_provider.hpp"
#include "swarm/llm/scripted_provider.hpp"

#include <cstdlib>
#include <fstream>

namespace swarm::gateway {

using nlohmann::json;

namespace {

std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? v : "";
}

std::shared_ptr<llm::LlmProvider> make_provider(const LlmConfig& c) {
    if (c.provider == "scripted") return std::make_shared<llm::ScriptedProvider>(llm::ScriptedProvider::load(c.script));
    llm::OpenAiConfig oc;
    if (!c.endpoint.empty()) oc.endpoint = c.endpoint;
    oc.model = c.model;
    oc.api_key = env_or_empty(c.api_key_env);
    return std::make_shared<llm::OpenAiProvider>(oc);
}

} // namespace

void write_json_atomic(const std::filesystem::path& path, const json& j) {
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << j.dump(1) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

FakeState::FakeState() : pipelines(&objects) {}

bool FakeState::load(const DataLayout& layout) {
    if (!std::filesystem::exists(layout.pipelines_state())) return false;
    if (std::filesystem::exists(layout.objects_state())) objects.restore(read_json_file(layout.objects_state()));
    pipelines.restore(read_json_file(layout.pipelines_state()));
    return true;
}

void FakeState::save(const DataLayout& layout) const {
    // Objects first: a crash in between leaves artifacts without their run,
    // which the next seed or tick simply overwrites.
    write_json_atomic(layout.objects_state(), objects.snapshot());
    write_json_atomic(layout.pipelines_state(), pipelines.snapshot());
}

std::unique_ptr<rag::Embedder> make_embedder(const EmbedderConfig& config) {
    if (config.kind == "hash") return std::make_unique<rag::HashEmbedder>(config.dimension);
    rag::HttpEmbedderConfig hc;
    hc.endpoint = config.endpoint;
    hc.model = config.model;
    hc.api_key = env_or_empty(config.api_key_env);
    hc.dimension = config.dimension;
    return std::make_unique<rag::HttpEmbedder>(hc);
}

App::App(GatewayConfig config, AppHooks hooks)
    : config_(std::move(config)), presign_(config_.effective_public_url()) {
    if (config_.data_dir) {
        layout_ = DataLayout{*config_.data_dir};
        std::filesystem::create_directories(layout_->root);
    }

    if (config_.backends.objects == "memory" || config_.backends.pipelines == "fake") fake_ = std::make_unique<FakeState>();
    bool restored = fake_ && layout_ && fake_->load(*layout_);
    if (fake_ && !restored && !config_.backends.fixture.empty()) {
        fake_->pipelines.seed(read_json_file(config_.backends.fixture));
        persist();
    }

    if (config_.backends.objects == "memory") {
        objects_ = &fake_->objects;
    } else {
        owned_objects_ = std::make_unique<minio::S3ObjectStore>(parse_endpoint(config_.backends.s3_endpoint),
                                                                config_.credentials.at(config_.backends.s3_credential_ref));
        objects_ = owned_objects_.get();
    }
    if (config_.backends.pipelines == "fake") {
        fake_pipelines_ = &fake_->pipelines;
        pipelines_ = fake_pipelines_;
    } else {
        owned_pipelines_ = std::make_unique<kfp::KfpRestBackend>(parse_endpoint(config_.backends.kfp_endpoint),
                                                                 env_or_empty(config_.backends.kfp_token_env));
        pipelines_ = owned_pipelines_.get();
    }

    embedder_ = make_embedder(config_.embedder);
    if (layout_ && std::filesystem::exists(layout_->index())) {
        index_ = std::make_unique<rag::VectorIndex>(rag::VectorIndex::load(layout_->index()));
        if (index_->embedder_id() != embedder_->id())
            throw std::invalid_argument("index " + layout_->index().string() + " was built with embedder '" +
                                        index_->embedder_id() + "', config selects '" + embedder_->id() + "'");
    } else {
        index_ = std::make_unique<rag::VectorIndex>(config_.embedder.dimension, embedder_->id());
    }

    kfp::KfpAgent::Options ko;
    ko.artifact_bucket = config_.backends.artifact_bucket;
    kfp_agent_ = std::make_unique<kfp::KfpAgent>(*pipelines_, ko);
    minio::MinioAgent::Options mo;
    mo.artifact_bucket = config_.backends.artifact_bucket;
    minio_agent_ = std::make_unique<minio::MinioAgent>(*objects_, fake_pipelines_, presign_, mo);
    rag_agent_ = std::make_unique<rag::RagAgent>(*embedder_, *index_);

    kfp::register_kfp_tools(registry_, *kfp_agent_);
    minio::register_minio_tools(registry_, *minio_agent_);
    rag::register_rag_tools(registry_, *rag_agent_);
    if (hooks.wrap_tool) registry_.decorate(hooks.wrap_tool);

    sessions_ = layout_ ? std::make_unique<session::SessionStore>(layout_->sessions())
                        : std::make_unique<session::SessionStore>();
    provider_ = hooks.provider ? hooks.provider : make_provider(config_.llm);

    orch::Orchestrator::Options oo;
    oo.turn.max_iterations = config_.limits.max_iterations;
    oo.turn.batch_concurrency = config_.limits.batch_concurrency;
    oo.context.max_chars = config_.limits.context_chars;
    oo.llm.model = config_.llm.model;
    if (config_.llm.temperature) oo.llm.temperature = *config_.llm.temperature;
    if (config_.llm.max_tokens) oo.llm.max_output_tokens = *config_.llm.max_tokens;
    if (layout_) {
        std::filesystem::create_directories(layout_->traces());
        oo.trace_dir = layout_->traces();
    }
    orchestrator_ = std::make_unique<orch::Orchestrator>(*sessions_, registry_, *provider_, oo);
}

App::~App() = default;

const UserContext* App::authenticate(std::string_view token) const {
    if (token.empty()) return nullptr;
    auto it = config_.tokens.find(token);
    return it == config_.tokens.end() ? nullptr : &it->second;
}

void App::persist() {
    if (!layout_ || !fake_) return;
    std::lock_guard lock(persist_mu_);
    fake_->save(*layout_);
}

} // namespace swarm::gateway
