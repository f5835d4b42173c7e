#include "swarm/rag/chunker.hpp"

#include "swarm/ids.hpp"
#include "swarm/rag/text.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarm::rag {

std::string chunk_id_for(std::string_view title, std::uint32_t ordinal, std::string_view text) {
    std::string key;
    key.append(title).push_back('\x1f');
    key.append(std::to_string(ordinal)).push_back('\x1f');
    key.append(text);
    return "chunk-" + sha256_hex(key).substr(0, 24);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    if (p < 0 || p > 100) throw std::invalid_argument("percentile outside [0, 100]");
    std::sort(values.begin(), values.end());
    double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> gap_distances(std::span<const std::string> sentences, Embedder& embedder, std::size_t window) {
    if (window == 0) throw std::invalid_argument("window must be at least 1");
    std::vector<double> out;
    if (sentences.size() < 2) return out;
    auto join = [&](std::size_t from, std::size_t to) {
        std::string s;
        for (auto i = from; i < to; ++i) {
            if (!s.empty()) s += sentence_separator;
            s += sentences[i];
        }
        return s;
    };
    std::vector<std::string> left, right;
    for (std::size_t gap = 0; gap + 1 < sentences.size(); ++gap) {
        left.push_back(join(gap + 1 >= window ? gap + 1 - window : 0, gap + 1));
        right.push_back(join(gap + 1, std::min(sentences.size(), gap + 1 + window)));
    }
    auto lv = embedder.embed_batch(left);
    auto rv = embedder.embed_batch(right);
    for (std::size_t i = 0; i < lv.size(); ++i) out.push_back(1.0 - dot(lv[i], rv[i]));
    return out;
}

std::vector<std::size_t> breakpoints(std::span<const double> distances, double pct) {
    std::vector<std::size_t> out;
    if (distances.empty()) return out;
    double threshold = percentile({distances.begin(), distances.end()}, pct);
    for (std::size_t i = 0; i < distances.size(); ++i)
        if (distances[i] > threshold) out.push_back(i);
    return out;
}

std::vector<Chunk> chunk_document(const SourceDocument& doc, Embedder& embedder, const ChunkerOptions& options) {
    if (doc.title.empty()) throw std::invalid_argument("document title is empty");
    auto body = normalize_text(doc.body);
    if (body.empty()) throw RagError(RagErrorKind::empty_document, "document '" + doc.title + "' has no text");
    auto sentences = split_sentences(body);
    auto cuts = breakpoints(gap_distances(sentences, embedder, options.window), options.percentile);

    std::vector<Chunk> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        std::string text;
        for (auto i = start; i < end; ++i) {
            if (!text.empty()) text += sentence_separator;
            text += sentences[i];
        }
        auto ordinal = static_cast<std::uint32_t>(out.size());
        out.push_back({chunk_id_for(doc.title, ordinal, text), doc.title, std::move(text), ordinal});
        start = end;
    };
    for (auto gap : cuts) emit(gap + 1);
    emit(sentences.size());
    return out;
}

} // namespace swarm::rag
