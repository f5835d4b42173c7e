#pragma once

#include "swarm/rag/embedder.hpp"

namespace swarm::rag {

struct SourceDocument {
    std::string title;
    std::string body;
    std::string source_uri;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_title;
    std::string text;
    std::uint32_t ordinal = 0;

    bool operator==(const Chunk&) const = default;
};

/// Content hash of (title, ordinal, text); equal inputs always give equal ids.
std::string chunk_id_for(std::string_view title, std::uint32_t ordinal, std::string_view text);

struct ChunkerOptions {
    double percentile = 95.0;
    /// Sentences on each side of a gap that are embedded together.
    std::size_t window = 1;
};

/// Linear-interpolation percentile (the numpy default); `p` in [0, 100].
double percentile(std::vector<double> values, double p);

/// Cosine distance across each gap between adjacent sentences: the `window`
/// sentences ending at i against the `window` sentences starting at i+1.
std::vector<double> gap_distances(std::span<const std::string> sentences, Embedder& embedder, std::size_t window);

/// Gap indices whose distance is strictly above the percentile threshold.
std::vector<std::size_t> breakpoints(std::span<const double> distances, double pct);

/// Splits the normalized body at semantic breakpoints. Joining the chunk
/// texts with a single space reproduces normalize_text(doc.body). Throws
/// RagError{empty_document} when nothing is left after normalization.
std::vector<Chunk> chunk_document(const SourceDocument& doc, Embedder& embedder, const ChunkerOptions& options = {});

} // namespace swarm::rag
