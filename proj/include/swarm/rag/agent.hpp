#pragma once

#include "swarm/orchestrator/tool_registry.hpp"
#include "swarm/rag/index.hpp"

namespace swarm::rag {

inline constexpr std::size_t context_budget = 8 * 1024;
inline constexpr std::string_view context_header = "Retrieved documentation (most similar excerpts first):\n\n";
inline constexpr std::string_view truncation_marker = " [...truncated]";

/// Header, then one "[i] title (score s)" entry per result in the given
/// order. Oversized excerpts are cut with truncation_marker so the whole
/// block fits `budget` bytes.
std::string format_context(std::span<const Retrieval> results, std::size_t budget = context_budget);

/// Documents (.txt/.md, title = file stem) directly inside `dir`, sorted by
/// path. Throws RagError{no_documents} if there are none.
std::vector<SourceDocument> read_document_dir(const std::filesystem::path& dir);

class RagAgent {
public:
    struct Options {
        std::size_t k = 5;
        ChunkerOptions chunker;
        std::size_t context_budget = rag::context_budget;
    };

    RagAgent(Embedder& embedder, VectorIndex& index) : RagAgent(embedder, index, Options{}) {}
    RagAgent(Embedder& embedder, VectorIndex& index, Options options);

    /// Chunks, embeds and upserts; returns the chunk count.
    std::size_t ingest(const SourceDocument& doc);
    std::vector<Retrieval> retrieve(std::string_view query, std::optional<std::size_t> k = std::nullopt);
    /// {context, sources[{title, ordinal, chunk_id, score}]}; an empty index is
    /// ToolError{not_found} suggesting ingestion.
    nlohmann::json retrieve_docs(std::string_view query);

    VectorIndex& index() { return index_; }

private:
    Embedder& embedder_;
    VectorIndex& index_;
    Options options_;
};

void register_rag_tools(orch::ToolRegistry& registry, RagAgent& agent);

} // namespace swarm::rag
