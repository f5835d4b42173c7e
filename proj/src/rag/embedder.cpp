#include "swarm/rag/embedder.hpp"

#include "swarm/ids.hpp"
#include "swarm/rag/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <stdexcept>

namespace swarm::rag {

using nlohmann::json;

std::string_view to_string(RagErrorKind kind) {
    switch (kind) {
    case RagErrorKind::embedder_unavailable: return "EmbedderUnavailable";
    case RagErrorKind::empty_document: return "EmptyDocument";
    case RagErrorKind::empty_index: return "EmptyIndex";
    case RagErrorKind::no_documents: return "NoDocuments";
    case RagErrorKind::corrupt_index: return "CorruptIndex";
    }
    return "EmbedderUnavailable";
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void normalize(Vector& v) {
    double n = l2_norm(v);
    if (n == 0) return;
    for (auto& x : v) x /= n;
}

std::vector<Vector> Embedder::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
    // 53 random bits in (0, 1]; never 0 so log() is finite.
    return (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
}

} // namespace

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension == 0) throw std::invalid_argument("dimension must be positive");
}

std::string HashEmbedder::id() const { return "hash-d" + std::to_string(dimension_) + "-" + hex64(seed_); }

Vector HashEmbedder::embed(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("cannot embed empty text");
    std::map<std::string, std::size_t> counts;
    for (auto& t : tokenize(text)) ++counts[std::move(t)];
    if (counts.empty()) counts[std::string(text)] = 1;

    Vector v(dimension_, 0.0);
    for (const auto& [token, count] : counts) {
        std::uint64_t state = fnv1a64(token, seed_ ^ 0xcbf29ce484222325ULL);
        for (std::size_t i = 0; i < dimension_; i += 2) {
            // Box-Muller: two independent standard normals per draw.
            double r = std::sqrt(-2.0 * std::log(uniform01(state)));
            double theta = 2.0 * std::numbers::pi * uniform01(state);
            v[i] += static_cast<double>(count) * r * std::cos(theta);
            if (i + 1 < dimension_) v[i + 1] += static_cast<double>(count) * r * std::sin(theta);
        }
    }
    normalize(v);
    return v;
}

HttpEmbedderConfig HttpEmbedderConfig::from_env() {
    HttpEmbedderConfig c;
    if (const char* v = std::getenv("SWARM_EMBED_ENDPOINT")) c.endpoint = v;
    if (const char* v = std::getenv("SWARM_EMBED_MODEL")) c.model = v;
    if (const char* v = std::getenv("SWARM_EMBED_API_KEY")) c.api_key = v;
    return c;
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config)
    : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {}

Vector HttpEmbedder::embed(std::string_view text) {
    std::string t(text);
    return embed_batch(std::span<const std::string>(&t, 1)).at(0);
}

std::vector<Vector> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
    for (const auto& t : texts)
        if (t.empty()) throw std::invalid_argument("cannot embed empty text");
    if (texts.empty()) return {};

    httplib::Client client(endpoint_.origin());
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    json body{{"model", config_.model}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
    auto result = client.Post(endpoint_.base_path + "/embeddings", headers, body.dump(), "application/json");
    if (!result)
        throw RagError(RagErrorKind::embedder_unavailable, "embedding endpoint unreachable: " + httplib::to_string(result.error()));
    if (result->status != 200)
        throw RagError(RagErrorKind::embedder_unavailable, "embedding endpoint returned HTTP " + std::to_string(result->status));

    std::vector<Vector> out(texts.size());
    try {
        auto reply = json::parse(result->body);
        for (const auto& item : reply.at("data")) {
            auto index = item.value("index", std::size_t{0});
            if (index >= out.size()) throw std::out_of_range("embedding index out of range");
            out[index] = item.at("embedding").get<Vector>();
        }
    } catch (const std::exception& e) {
        throw RagError(RagErrorKind::embedder_unavailable, std::string("malformed embedding response: ") + e.what());
    }
    for (auto& v : out) {
        if (v.empty()) throw RagError(RagErrorKind::embedder_unavailable, "embedding response is missing an input");
        if (config_.dimension == 0) config_.dimension = v.size();
        if (v.size() != config_.dimension)
            throw RagError(RagErrorKind::embedder_unavailable, "embedding dimension changed between calls");
        normalize(v);
    }
    return out;
}

} // namespace swarm::rag
