#include "swarm/rag/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>

namespace swarm::rag {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr char magic[8] = {'S', 'W', 'R', 'M', 'I', 'D', 'X', '1'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof value))
        throw RagError(RagErrorKind::corrupt_index, "index file is truncated");
    return value;
}

std::string get_string(std::istream& in, std::uint64_t remaining) {
    auto n = get<std::uint32_t>(in);
    if (n > remaining) throw RagError(RagErrorKind::corrupt_index, "string length exceeds file size");
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw RagError(RagErrorKind::corrupt_index, "index file is truncated");
    return s;
}

} // namespace

bool retrieval_before(const Retrieval& a, const Retrieval& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.chunk.doc_title != b.chunk.doc_title) return a.chunk.doc_title < b.chunk.doc_title;
    return a.chunk.ordinal < b.chunk.ordinal;
}

VectorIndex::VectorIndex(std::size_t dimension, std::string embedder_id)
    : dimension_(dimension), embedder_id_(std::move(embedder_id)) {
    if (dimension == 0) throw std::invalid_argument("dimension must be positive");
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept
    : dimension_(other.dimension_),
      embedder_id_(std::move(other.embedder_id_)),
      chunks_(std::move(other.chunks_)),
      vectors_(std::move(other.vectors_)) {}

void VectorIndex::upsert_document(const std::string& title, const std::vector<Chunk>& chunks,
                                  const std::vector<Vector>& vectors) {
    if (chunks.size() != vectors.size()) throw std::invalid_argument("one vector per chunk required");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (chunks[i].doc_title != title) throw std::invalid_argument("chunk title does not match document");
        if (vectors[i].size() != dimension_) throw std::invalid_argument("vector dimension mismatch");
        if (std::abs(l2_norm(vectors[i]) - 1.0) > unit_norm_tolerance) throw std::invalid_argument("vector is not unit norm");
    }
    std::unique_lock lock(mu_);
    std::vector<Chunk> kept;
    std::vector<double> kept_vectors;
    kept.reserve(chunks_.size() + chunks.size());
    kept_vectors.reserve(vectors_.size() + chunks.size() * dimension_);
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (chunks_[i].doc_title == title) continue;
        kept.push_back(std::move(chunks_[i]));
        kept_vectors.insert(kept_vectors.end(), vectors_.begin() + static_cast<std::ptrdiff_t>(i * dimension_),
                            vectors_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dimension_));
    }
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        kept.push_back(chunks[i]);
        kept_vectors.insert(kept_vectors.end(), vectors[i].begin(), vectors[i].end());
    }
    chunks_ = std::move(kept);
    vectors_ = std::move(kept_vectors);
}

std::vector<Retrieval> VectorIndex::retrieve(std::span<const double> query, std::size_t k) const {
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (query.size() != dimension_) throw std::invalid_argument("query dimension mismatch");
    std::shared_lock lock(mu_);
    if (chunks_.empty()) throw RagError(RagErrorKind::empty_index, "the document index is empty");

    struct Scored {
        double score;
        std::size_t index;
    };
    std::vector<Scored> scored(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i)
        scored[i] = {dot(query, std::span<const double>(vectors_.data() + i * dimension_, dimension_)), i};
    auto before = [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        const auto& ca = chunks_[a.index];
        const auto& cb = chunks_[b.index];
        if (ca.doc_title != cb.doc_title) return ca.doc_title < cb.doc_title;
        return ca.ordinal < cb.ordinal;
    };
    auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), before);

    std::vector<Retrieval> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({chunks_[scored[i].index], scored[i].score});
    return out;
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mu_);
    return chunks_.size();
}

std::vector<std::string> VectorIndex::titles() const {
    std::shared_lock lock(mu_);
    std::set<std::string> titles;
    for (const auto& c : chunks_) titles.insert(c.doc_title);
    return {titles.begin(), titles.end()};
}

void VectorIndex::scan(const std::function<void(const Chunk&, std::span<const double>)>& fn) const {
    std::shared_lock lock(mu_);
    for (std::size_t i = 0; i < chunks_.size(); ++i)
        fn(chunks_[i], std::span<const double>(vectors_.data() + i * dimension_, dimension_));
}

void VectorIndex::save(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        std::shared_lock lock(mu_);
        out.write(magic, sizeof magic);
        put(out, static_cast<std::uint32_t>(dimension_));
        put(out, static_cast<std::uint64_t>(chunks_.size()));
        put_string(out, embedder_id_);
        for (std::size_t i = 0; i < chunks_.size(); ++i) {
            put_string(out, chunks_[i].chunk_id);
            put_string(out, chunks_[i].doc_title);
            put_string(out, chunks_[i].text);
            put(out, chunks_[i].ordinal);
            out.write(reinterpret_cast<const char*>(vectors_.data() + i * dimension_),
                      static_cast<std::streamsize>(dimension_ * sizeof(double)));
        }
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RagError(RagErrorKind::corrupt_index, "cannot open " + path.string());
    auto file_size = std::filesystem::file_size(path);
    char header[sizeof magic];
    if (!in.read(header, sizeof header) || std::memcmp(header, magic, sizeof magic) != 0)
        throw RagError(RagErrorKind::corrupt_index, path.string() + " is not an index file");
    auto dimension = get<std::uint32_t>(in);
    auto count = get<std::uint64_t>(in);
    if (dimension == 0 || count > file_size / (dimension * sizeof(double)))
        throw RagError(RagErrorKind::corrupt_index, "index header is inconsistent with the file size");
    VectorIndex index(dimension, get_string(in, file_size));
    index.chunks_.reserve(count);
    index.vectors_.resize(count * dimension);
    for (std::uint64_t i = 0; i < count; ++i) {
        Chunk c;
        c.chunk_id = get_string(in, file_size);
        c.doc_title = get_string(in, file_size);
        c.text = get_string(in, file_size);
        c.ordinal = get<std::uint32_t>(in);
        if (!in.read(reinterpret_cast<char*>(index.vectors_.data() + i * dimension),
                     static_cast<std::streamsize>(dimension * sizeof(double))))
            throw RagError(RagErrorKind::corrupt_index, "index file is truncated");
        index.chunks_.push_back(std::move(c));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw RagError(RagErrorKind::corrupt_index, "trailing bytes in index file");
    return index;
}

} // namespace swarm::rag
