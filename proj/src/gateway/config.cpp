#include "swarm/gateway/config.hpp"

#include <fstream>
#include <stdexcept>

namespace swarm::gateway {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw std::invalid_argument("config: " + field + ": " + why);
}

template <class T>
T get(const json& obj, const std::string& field, const std::string& path, T fallback) {
    if (!obj.contains(field)) return fallback;
    try {
        return obj.at(field).get<T>();
    } catch (const json::exception&) {
        bad(path + field, "wrong type");
    }
}

const json& section(const json& root, const std::string& name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    if (!root.at(name).is_object()) bad(name, "must be an object");
    return root.at(name);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void one_of(const std::string& field, const std::string& value, std::initializer_list<std::string_view> allowed) {
    for (auto a : allowed)
        if (value == a) return;
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : "|") + std::string(a);
    bad(field, "'" + value + "' is not one of " + list);
}

} // namespace

GatewayConfig GatewayConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) bad("<root>", "must be an object");
    GatewayConfig c;

    const auto& listen = section(j, "listen");
    c.host = get<std::string>(listen, "host", "listen.", c.host);
    c.port = get<int>(listen, "port", "listen.", c.port);
    if (c.port < 0 || c.port > 65535) bad("listen.port", "out of range");
    c.public_url = get<std::string>(j, "public_url", "", "");
    if (auto dir = get<std::string>(j, "data_dir", "", ""); !dir.empty()) c.data_dir = resolve(base_dir, dir);

    const auto& llm = section(j, "llm");
    c.llm.provider = get<std::string>(llm, "provider", "llm.", c.llm.provider);
    one_of("llm.provider", c.llm.provider, {"scripted", "openai"});
    c.llm.script = resolve(base_dir, get<std::string>(llm, "script", "llm.", ""));
    c.llm.endpoint = get<std::string>(llm, "endpoint", "llm.", "");
    c.llm.model = get<std::string>(llm, "model", "llm.", "");
    c.llm.api_key_env = get<std::string>(llm, "api_key_env", "llm.", c.llm.api_key_env);
    if (llm.contains("temperature")) c.llm.temperature = get<double>(llm, "temperature", "llm.", 0.0);
    if (llm.contains("max_tokens")) c.llm.max_tokens = get<int>(llm, "max_tokens", "llm.", 0);
    if (c.llm.provider == "scripted" && c.llm.script.empty()) bad("llm.script", "required for the scripted provider");
    if (c.llm.provider == "openai" && c.llm.model.empty()) bad("llm.model", "required for the openai provider");

    const auto& emb = section(j, "embedder");
    c.embedder.kind = get<std::string>(emb, "kind", "embedder.", c.embedder.kind);
    one_of("embedder.kind", c.embedder.kind, {"hash", "http"});
    c.embedder.dimension = get<std::size_t>(emb, "dimension", "embedder.", c.embedder.dimension);
    c.embedder.endpoint = get<std::string>(emb, "endpoint", "embedder.", "");
    c.embedder.model = get<std::string>(emb, "model", "embedder.", "");
    c.embedder.api_key_env = get<std::string>(emb, "api_key_env", "embedder.", c.embedder.api_key_env);
    if (c.embedder.kind == "hash" && c.embedder.dimension == 0) bad("embedder.dimension", "must be positive");
    if (c.embedder.kind == "http" && c.embedder.endpoint.empty()) bad("embedder.endpoint", "required for http");

    const auto& be = section(j, "backends");
    c.backends.pipelines = get<std::string>(be, "pipelines", "backends.", c.backends.pipelines);
    one_of("backends.pipelines", c.backends.pipelines, {"fake", "rest"});
    c.backends.objects = get<std::string>(be, "objects", "backends.", c.backends.objects);
    one_of("backends.objects", c.backends.objects, {"memory", "s3"});
    c.backends.fixture = resolve(base_dir, get<std::string>(be, "fixture", "backends.", ""));
    c.backends.kfp_endpoint = get<std::string>(be, "kfp_endpoint", "backends.", "");
    c.backends.kfp_token_env = get<std::string>(be, "kfp_token_env", "backends.", c.backends.kfp_token_env);
    c.backends.s3_endpoint = get<std::string>(be, "s3_endpoint", "backends.", "");
    c.backends.s3_credential_ref = get<std::string>(be, "s3_credential_ref", "backends.", "");
    c.backends.artifact_bucket = get<std::string>(be, "artifact_bucket", "backends.", c.backends.artifact_bucket);
    if (c.backends.pipelines == "rest" && c.backends.kfp_endpoint.empty())
        bad("backends.kfp_endpoint", "required for rest pipelines");
    if (c.backends.objects == "s3" && c.backends.s3_endpoint.empty())
        bad("backends.s3_endpoint", "required for s3 objects");

    const auto& creds = section(j, "credentials");
    for (const auto& [ref, v] : creds.items()) {
        auto path = "credentials." + ref + ".";
        minio::S3Credentials cr;
        cr.access_key = get<std::string>(v, "access_key", path, "");
        cr.secret_key = get<std::string>(v, "secret_key", path, "");
        cr.region = get<std::string>(v, "region", path, cr.region);
        if (cr.access_key.empty() || cr.secret_key.empty()) bad(path + "access_key", "access_key and secret_key required");
        c.credentials.emplace(ref, std::move(cr));
    }
    if (c.backends.objects == "s3" && !c.credentials.contains(c.backends.s3_credential_ref))
        bad("backends.s3_credential_ref", "no such entry in credentials");

    const auto& tokens = section(j, "tokens");
    for (const auto& [token, v] : tokens.items()) {
        auto path = "tokens." + token + ".";
        if (token.empty()) bad("tokens", "empty token");
        if (!v.is_object()) bad("tokens." + token, "must be an object");
        UserContext ctx;
        ctx.user_id = get<std::string>(v, "user_id", path, "");
        ctx.namespace_name = get<std::string>(v, "namespace", path, "");
        ctx.allowed_buckets = get<std::set<std::string>>(v, "buckets", path, {});
        ctx.credential_ref = get<std::string>(v, "credential_ref", path, "");
        if (ctx.user_id.empty()) bad(path + "user_id", "required");
        if (ctx.namespace_name.empty()) bad(path + "namespace", "required");
        c.tokens.emplace(token, std::move(ctx));
    }

    const auto& limits = section(j, "limits");
    c.limits.max_iterations = get<std::size_t>(limits, "max_iterations", "limits.", c.limits.max_iterations);
    c.limits.batch_concurrency = get<std::size_t>(limits, "batch_concurrency", "limits.", c.limits.batch_concurrency);
    c.limits.context_chars = get<std::size_t>(limits, "context_chars", "limits.", c.limits.context_chars);
    if (c.limits.max_iterations == 0) bad("limits.max_iterations", "must be positive");
    if (c.limits.batch_concurrency == 0) bad("limits.batch_concurrency", "must be positive");
    return c;
}

GatewayConfig GatewayConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

std::string GatewayConfig::effective_public_url() const {
    if (!public_url.empty()) return public_url;
    return "http://" + host + ":" + std::to_string(port);
}

} // namespace swarm::gateway
