#pragma once

#include "swarm/error.hpp"
#include "swarm/url.hpp"

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swarm::rag {

enum class RagErrorKind { embedder_unavailable, empty_document, empty_index, no_documents, corrupt_index };
using RagError = Error<RagErrorKind>;

std::string_view to_string(RagErrorKind kind);

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
/// Scales to unit length; a zero vector is left as is.
void normalize(Vector& v);

class Embedder {
public:
    virtual ~Embedder() = default;

    /// Stable identifier stored alongside indexed vectors.
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    /// Unit-norm embedding. Throws std::invalid_argument for empty text and
    /// RagError{embedder_unavailable} when the backing service fails.
    virtual Vector embed(std::string_view text) = 0;
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts);
};

/// Deterministic test embedder: every lowercase token contributes a
/// Gaussian direction seeded by its hash, weighted by its count; the sum is
/// L2-normalized. Text with no tokens is treated as one token.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 32, std::uint64_t seed = 0x5eed);

    std::string id() const override;
    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct HttpEmbedderConfig {
    std::string endpoint;  // base URL of an OpenAI-compatible API, e.g. http://host:8080/v1
    std::string model;
    std::string api_key;
    std::size_t dimension = 0;  // 0: learned from the first response
    std::chrono::seconds timeout{30};

    /// Reads SWARM_EMBED_ENDPOINT, SWARM_EMBED_MODEL and SWARM_EMBED_API_KEY.
    static HttpEmbedderConfig from_env();
};

/// POST {endpoint}/embeddings with {"model", "input": [...]}.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(HttpEmbedderConfig config);

    std::string id() const override { return "http:" + config_.model; }
    std::size_t dimension() const override { return config_.dimension; }
    Vector embed(std::string_view text) override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;

private:
    HttpEmbedderConfig config_;
    Endpoint endpoint_;
};

} // namespace swarm::rag
