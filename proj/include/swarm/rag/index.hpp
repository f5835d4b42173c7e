#pragma once

#include "swarm/rag/chunker.hpp"

#include <filesystem>
#include <functional>
#include <shared_mutex>

namespace swarm::rag {

struct Retrieval {
    Chunk chunk;
    double score = 0;  // cosine similarity
};

/// Orders by score descending, then (doc_title, ordinal) ascending.
bool retrieval_before(const Retrieval& a, const Retrieval& b);

/// Exact-scan vector index. Vectors sit in one contiguous buffer; readers
/// share the lock, ingestion takes it exclusively.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dimension, std::string embedder_id = {});
    /// Not synchronized; only for handing over a freshly built index.
    VectorIndex(VectorIndex&& other) noexcept;

    /// Replaces every chunk of `title` with `chunks`. Vectors must have the
    /// index dimension and unit norm within 1e-6.
    void upsert_document(const std::string& title, const std::vector<Chunk>& chunks, const std::vector<Vector>& vectors);

    /// The k best chunks for a unit query vector. Throws RagError{empty_index}
    /// when nothing is indexed and std::invalid_argument for k == 0.
    std::vector<Retrieval> retrieve(std::span<const double> query, std::size_t k) const;

    std::size_t size() const;
    std::size_t dimension() const { return dimension_; }
    const std::string& embedder_id() const { return embedder_id_; }
    std::vector<std::string> titles() const;

    /// Calls `fn(chunk, vector)` for every stored entry under a shared lock.
    void scan(const std::function<void(const Chunk&, std::span<const double>)>& fn) const;

    /// Binary format: magic "SWRMIDX1", u32 dimension, u64 count, embedder id,
    /// then per chunk its id, title, text (u32 length-prefixed), u32 ordinal
    /// and `dimension` little-endian doubles. Writes go through a temp file.
    void save(const std::filesystem::path& path) const;
    /// Throws RagError{corrupt_index} on a malformed file.
    static VectorIndex load(const std::filesystem::path& path);

private:
    std::size_t dimension_;
    std::string embedder_id_;
    mutable std::shared_mutex mu_;
    std::vector<Chunk> chunks_;
    std::vector<double> vectors_;  // chunks_.size() * dimension_
};

inline constexpr double unit_norm_tolerance = 1e-6;

} // namespace swarm::rag
