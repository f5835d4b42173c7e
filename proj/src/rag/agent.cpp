#include "swarm/rag/agent.hpp"

#include "swarm/utf8.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace swarm::rag {

using nlohmann::json;

namespace {

std::string score_text(double score) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", score);
    return buf;
}

} // namespace

std::string format_context(std::span<const Retrieval> results, std::size_t budget) {
    std::string out(context_header);
    if (out.size() > budget) return std::string(utf8_prefix(out, budget));
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        // Split what is left evenly over the remaining entries.
        auto share = (budget - out.size()) / (results.size() - i);
        auto heading = "[" + std::to_string(i + 1) + "] " + r.chunk.doc_title + " (score " + score_text(r.score) + ")\n";
        if (heading.size() + 2 > share) {
            out += utf8_prefix(heading, share);
            continue;
        }
        auto room = share - heading.size() - 2;  // trailing "\n\n"
        std::string body = r.chunk.text;
        if (body.size() > room) {
            body = room > truncation_marker.size()
                       ? std::string(utf8_prefix(body, room - truncation_marker.size())) + std::string(truncation_marker)
                       : std::string(utf8_prefix(truncation_marker, room));
        }
        out += heading + body + "\n\n";
    }
    return out;
}

std::vector<SourceDocument> read_document_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw RagError(RagErrorKind::no_documents, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".txt" || ext == ".md") paths.push_back(entry.path());
    }
    if (paths.empty()) throw RagError(RagErrorKind::no_documents, "no documents (.txt/.md) in " + dir.string());
    std::sort(paths.begin(), paths.end());
    std::vector<SourceDocument> docs;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        docs.push_back({p.stem().string(), body.str(), p.string()});
    }
    return docs;
}

RagAgent::RagAgent(Embedder& embedder, VectorIndex& index, Options options)
    : embedder_(embedder), index_(index), options_(std::move(options)) {
    if (embedder_.dimension() != 0 && embedder_.dimension() != index_.dimension())
        throw std::invalid_argument("embedder and index dimensions differ");
}

std::size_t RagAgent::ingest(const SourceDocument& doc) {
    auto chunks = chunk_document(doc, embedder_, options_.chunker);
    std::vector<std::string> texts;
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = embedder_.embed_batch(texts);
    index_.upsert_document(doc.title, chunks, vectors);
    return chunks.size();
}

std::vector<Retrieval> RagAgent::retrieve(std::string_view query, std::optional<std::size_t> k) {
    if (query.empty()) throw std::invalid_argument("query is empty");
    if (index_.size() == 0) throw RagError(RagErrorKind::empty_index, "the document index is empty");
    auto q = embedder_.embed(query);
    return index_.retrieve(q, k.value_or(options_.k));
}

json RagAgent::retrieve_docs(std::string_view query) {
    std::vector<Retrieval> results;
    try {
        results = retrieve(query);
    } catch (const RagError& e) {
        if (e.kind() == RagErrorKind::empty_index)
            throw ToolError(ErrorType::not_found,
                            "No documentation has been indexed yet. Ingest documents first (swarm index <dir>), then ask again.");
        throw ToolError(ErrorType::backend_unavailable, e.what());
    } catch (const std::invalid_argument& e) {
        throw ToolError(ErrorType::invalid_argument, e.what(), {{"parameter", "query"}});
    }
    json sources = json::array();
    for (const auto& r : results)
        sources.push_back({{"title", r.chunk.doc_title},
                           {"ordinal", r.chunk.ordinal},
                           {"chunk_id", r.chunk.chunk_id},
                           {"score", r.score}});
    return {{"context", format_context(results, options_.context_budget)}, {"sources", sources}};
}

void register_rag_tools(orch::ToolRegistry& registry, RagAgent& agent) {
    registry.register_tool(
        {"retrieve_docs",
         "Search the indexed internal documentation (component docs, pipeline templates) and return the most relevant "
         "excerpts.",
         {{"query", llm::ParamType::string, true, std::nullopt, "What to look up"}}},
        [&agent](const json& args, const UserContext&) { return agent.retrieve_docs(args["query"].get<std::string>()); },
        orch::AgentTag::rag);
}

} // namespace swarm::rag
