#pragma once

#include "swarm/minio/s3_client.hpp"
#include "swarm/session/user_context.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace swarm::gateway {

struct LlmConfig {
    std::string provider = "scripted";  // scripted | openai
    std::filesystem::path script;       // scripted provider scenario
    std::string endpoint;               // openai: empty means the library default
    std::string model;
    std::string api_key_env = "SWARM_LLM_API_KEY";
    std::optional<double> temperature;
    std::optional<int> max_tokens;
};

struct EmbedderConfig {
    std::string kind = "hash";  // hash | http
    std::size_t dimension = 32;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "SWARM_EMBED_API_KEY";
};

struct BackendConfig {
    std::string pipelines = "fake";  // fake | rest
    std::string objects = "memory";  // memory | s3
    std::filesystem::path fixture;   // seeds fake backends on first start
    std::string kfp_endpoint;
    std::string kfp_token_env = "SWARM_KFP_TOKEN";
    std::string s3_endpoint;
    std::string s3_credential_ref;
    std::string artifact_bucket = "mlpipeline";
};

struct Limits {
    std::size_t max_iterations = 8;
    std::size_t batch_concurrency = 4;
    std::size_t context_chars = 96 * 1024;
};

/// The single JSON configuration document of the gateway:
///   {listen: {host, port}, public_url, data_dir, llm, embedder, backends,
///    tokens: {<token>: {user_id, namespace, buckets, credential_ref}},
///    credentials: {<ref>: {access_key, secret_key, region}}, limits}
/// Relative paths resolve against `base_dir`.
struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string public_url;  // defaults to http://host:port
    std::optional<std::filesystem::path> data_dir;
    LlmConfig llm;
    EmbedderConfig embedder;
    BackendConfig backends;
    std::map<std::string, UserContext, std::less<>> tokens;
    std::map<std::string, minio::S3Credentials> credentials;
    Limits limits;

    /// Throws std::invalid_argument naming the offending field.
    static GatewayConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static GatewayConfig load(const std::filesystem::path& path);

    std::string effective_public_url() const;
};

} // namespace swarm::gateway
