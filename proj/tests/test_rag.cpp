#include "harness.hpp"

#include "swarm/rag/text.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>

using namespace swarm;
using namespace swarm::rag;
using namespace swarm::testing;

namespace {

std::string random_prose(std::mt19937& rng, int sentences) {
    static const std::vector<std::string> words{"model", "pipeline", "bucket", "metric", "run", "kernel", "tree",
                                                "data",  "e.g.",     "Dr.",    "v2.1",  "42",   "réseau", "Fig."};
    static const std::vector<std::string> ends{".", "!", "?", ""};
    static const std::vector<std::string> gaps{" ", "  ", "\n", "\t ", "\n\n"};
    std::string out = rng() % 2 ? "  " : "";
    for (int s = 0; s < sentences; ++s) {
        out += "Sentence";
        int n = 1 + static_cast<int>(rng() % 10);
        for (int w = 0; w < n; ++w) out += gaps[rng() % gaps.size()] + words[rng() % words.size()];
        out += ends[rng() % ends.size()] + gaps[rng() % gaps.size()];
    }
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? std::string(sentence_separator) : "") + parts[i];
    return out;
}

} // namespace

TEST(Text, NormalizeAndTokenize) {
    EXPECT_EQ(normalize_text("  a \n\t b  c "), "a b c");
    EXPECT_EQ(normalize_text(" \n "), "");
    EXPECT_EQ(tokenize("SVM-rbf, C=1.0!"), (std::vector<std::string>{"svm", "rbf", "c", "1", "0"}));
    EXPECT_TRUE(tokenize("--- ...").empty());
}

TEST(Text, SentenceSplitHonoursAbbreviations) {
    auto s = split_sentences("Set C, e.g. Use 1. Ask Dr. Smith first! Why? Because. lower case stays");
    EXPECT_EQ(s, (std::vector<std::string>{"Set C, e.g. Use 1.", "Ask Dr. Smith first!", "Why?",
                                           "Because. lower case stays"}));
    EXPECT_TRUE(split_sentences("").empty());
}

TEST(Text, SentenceSplitIsLosslessProperty) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        auto normalized = normalize_text(random_prose(rng, 1 + static_cast<int>(rng() % 12)));
        auto sentences = split_sentences(normalized);
        EXPECT_EQ(join(sentences), normalized);
        for (const auto& s : sentences) {
            EXPECT_FALSE(s.empty());
            EXPECT_EQ(normalize_text(s), s);
        }
    }
}

TEST(Percentile, MatchesNumpyLinearInterpolation) {
    EXPECT_NEAR(percentile({1, 2, 3, 4}, 95), 3.85, 1e-12);
    EXPECT_NEAR(percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 95), 9.55, 1e-12);
    EXPECT_NEAR(percentile({10, 1, 5}, 50), 5.0, 1e-12);
    EXPECT_NEAR(percentile({3}, 95), 3.0, 1e-12);
    EXPECT_NEAR(percentile({1, 2}, 0), 1.0, 1e-12);
    EXPECT_NEAR(percentile({1, 2}, 100), 2.0, 1e-12);
}

TEST(Breakpoints, StrictlyAboveThreshold) {
    std::vector<double> d{0.1, 0.9, 0.1, 0.1};
    EXPECT_EQ(breakpoints(d, 95), (std::vector<std::size_t>{1}));
    std::vector<double> flat{0.2, 0.2, 0.2};
    EXPECT_TRUE(breakpoints(flat, 95).empty());
    EXPECT_TRUE(breakpoints(std::vector<double>{}, 95).empty());
}

TEST(HashEmbedder, UnitNormAndDeterministic) {
    HashEmbedder a(32), b(32), other(32, 7);
    std::mt19937 rng(9);
    for (int i = 0; i < 100; ++i) {
        auto text = random_prose(rng, 2);
        auto v = a.embed(text);
        ASSERT_EQ(v.size(), 32u);
        EXPECT_NEAR(l2_norm(v), 1.0, unit_norm_tolerance);
        EXPECT_EQ(v, b.embed(text));
        EXPECT_NE(v, other.embed(text));
    }
    EXPECT_NEAR(l2_norm(a.embed("!!!")), 1.0, unit_norm_tolerance);
    EXPECT_THROW(a.embed(""), std::invalid_argument);
    EXPECT_NE(a.id(), other.id());
}

TEST(Chunker, LosslessDeterministicUnitNormProperty) {
    HashEmbedder embedder(32);
    std::mt19937 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        SourceDocument doc{"doc-" + std::to_string(trial), random_prose(rng, 1 + static_cast<int>(rng() % 30)), ""};
        ChunkerOptions options{rng() % 2 ? 95.0 : 50.0, 1 + rng() % 3};
        auto chunks = chunk_document(doc, embedder, options);
        ASSERT_FALSE(chunks.empty());
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            EXPECT_EQ(chunks[i].ordinal, i);
            EXPECT_EQ(chunks[i].doc_title, doc.title);
            EXPECT_EQ(chunks[i].chunk_id, chunk_id_for(doc.title, chunks[i].ordinal, chunks[i].text));
            EXPECT_NEAR(l2_norm(embedder.embed(chunks[i].text)), 1.0, unit_norm_tolerance);
            texts.push_back(chunks[i].text);
        }
        EXPECT_EQ(join(texts), normalize_text(doc.body));
        EXPECT_EQ(chunk_document(doc, embedder, options), chunks);
    }
}

TEST(Chunker, EmptyDocumentIsAnError) {
    HashEmbedder embedder(32);
    try {
        chunk_document({"blank", " \n\t ", ""}, embedder);
        FAIL();
    } catch (const RagError& e) {
        EXPECT_EQ(e.kind(), RagErrorKind::empty_document);
    }
}

TEST(ChunkId, DependsOnEveryField) {
    auto id = chunk_id_for("t", 0, "x");
    EXPECT_EQ(id, chunk_id_for("t", 0, "x"));
    EXPECT_NE(id, chunk_id_for("u", 0, "x"));
    EXPECT_NE(id, chunk_id_for("t", 1, "x"));
    EXPECT_NE(id, chunk_id_for("t", 0, "y"));
    EXPECT_NE(chunk_id_for("ab", 0, "c"), chunk_id_for("a", 0, "bc"));
}

TEST(VectorIndex, TopKMatchesBruteForceProperty) {
    HashEmbedder embedder(32);
    std::mt19937 rng(31);
    VectorIndex index(32, embedder.id());
    std::vector<std::pair<Chunk, Vector>> all;
    for (int d = 0; d < 20; ++d) {
        std::vector<Chunk> chunks;
        std::vector<Vector> vectors;
        for (std::uint32_t i = 0; i < 5; ++i) {
            auto text = random_prose(rng, 1);
            auto title = "doc" + std::to_string(d);
            chunks.push_back({chunk_id_for(title, i, text), title, text, i});
            vectors.push_back(embedder.embed(text));
            all.emplace_back(chunks.back(), vectors.back());
        }
        index.upsert_document("doc" + std::to_string(d), chunks, vectors);
    }
    ASSERT_EQ(index.size(), 100u);
    for (int q = 0; q < 50; ++q) {
        auto query = embedder.embed(random_prose(rng, 1));
        std::vector<Retrieval> expected;
        for (const auto& [c, v] : all) expected.push_back({c, dot(query, v)});
        std::sort(expected.begin(), expected.end(), retrieval_before);
        std::size_t k = 1 + rng() % 12;
        auto got = index.retrieve(query, k);
        ASSERT_EQ(got.size(), k);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(got[i].chunk.chunk_id, expected[i].chunk.chunk_id);
            EXPECT_NEAR(got[i].score, expected[i].score, 1e-12);
        }
    }
    EXPECT_EQ(index.retrieve(embedder.embed("x"), 1000).size(), 100u);
    EXPECT_THROW(index.retrieve(embedder.embed("x"), 0), std::invalid_argument);
}

TEST(VectorIndex, UpsertReplacesAndValidates) {
    HashEmbedder embedder(8);
    VectorIndex index(8);
    auto mk = [&](const std::string& title, const std::vector<std::string>& texts) {
        std::vector<Chunk> chunks;
        std::vector<Vector> vectors;
        for (std::uint32_t i = 0; i < texts.size(); ++i) {
            chunks.push_back({chunk_id_for(title, i, texts[i]), title, texts[i], i});
            vectors.push_back(embedder.embed(texts[i]));
        }
        index.upsert_document(title, chunks, vectors);
    };
    mk("a", {"one", "two", "three"});
    mk("b", {"four"});
    mk("a", {"five"});
    EXPECT_EQ(index.size(), 2u);
    EXPECT_EQ(index.titles(), (std::vector<std::string>{"a", "b"}));
    EXPECT_NO_THROW(index.retrieve(embedder.embed("x"), 1));
    Chunk c{"id", "c", "text", 0};
    EXPECT_THROW(index.upsert_document("c", {c}, {Vector(8, 1.0)}), std::invalid_argument);
    EXPECT_THROW(index.upsert_document("c", {c}, {Vector(4, 0.5)}), std::invalid_argument);
    EXPECT_THROW(index.upsert_document("c", {c}, {}), std::invalid_argument);

    VectorIndex empty(8);
    try {
        empty.retrieve(embedder.embed("x"), 1);
        FAIL();
    } catch (const RagError& e) {
        EXPECT_EQ(e.kind(), RagErrorKind::empty_index);
    }
}

TEST(VectorIndex, SaveLoadRoundTripAndCorruption) {
    HashEmbedder embedder(16);
    RagAgent::Options options;
    VectorIndex index(16, embedder.id());
    RagAgent agent(embedder, index, options);
    for (const auto& doc : read_document_dir(fixture_path("docs"))) agent.ingest(doc);

    TempDir dir("index");
    auto path = dir.path() / "index.bin";
    index.save(path);
    auto loaded = VectorIndex::load(path);
    EXPECT_EQ(loaded.size(), index.size());
    EXPECT_EQ(loaded.embedder_id(), embedder.id());
    auto q = embedder.embed("pipeline parameters");
    auto a = index.retrieve(q, 5), b = loaded.retrieve(q, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].chunk, b[i].chunk);
        EXPECT_EQ(a[i].score, b[i].score);
    }

    auto bytes = std::filesystem::file_size(path);
    for (auto cut : {std::uintmax_t{0}, std::uintmax_t{5}, bytes / 2, bytes - 1}) {
        auto bad = dir.path() / ("cut" + std::to_string(cut));
        std::filesystem::copy_file(path, bad);
        std::filesystem::resize_file(bad, cut);
        try {
            VectorIndex::load(bad);
            ADD_FAILURE() << "cut at " << cut;
        } catch (const RagError& e) {
            EXPECT_EQ(e.kind(), RagErrorKind::corrupt_index);
        }
    }
    {
        std::ofstream out(dir.path() / "magic", std::ios::binary);
        out << "NOTANIDX" << std::string(64, '\0');
    }
    EXPECT_THROW(VectorIndex::load(dir.path() / "magic"), RagError);
}

TEST(FormatContext, FitsBudgetAndMarksTruncation) {
    std::vector<Retrieval> results;
    for (std::uint32_t i = 0; i < 6; ++i)
        results.push_back({{"id" + std::to_string(i), "doc", std::string(3000, 'a' + i), i}, 0.9 - i * 0.1});
    auto text = format_context(results);
    EXPECT_LE(text.size(), context_budget);
    EXPECT_EQ(text.rfind(context_header, 0), 0u);
    EXPECT_NE(text.find(truncation_marker), std::string::npos);
    EXPECT_NE(text.find("[1] doc"), std::string::npos);

    std::vector<Retrieval> small{{{"x", "guide", "short text", 0}, 0.5}};
    auto fits = format_context(small);
    EXPECT_EQ(fits.find(truncation_marker), std::string::npos);
    EXPECT_NE(fits.find("short text"), std::string::npos);
    for (std::size_t budget : {200u, 400u, 1000u}) EXPECT_LE(format_context(results, budget).size(), budget);
}

TEST(Documents, DirectoryReadingRules) {
    auto docs = read_document_dir(fixture_path("docs"));
    ASSERT_EQ(docs.size(), 3u);
    EXPECT_EQ(docs[0].title, "data-governance");
    TempDir dir("nodocs");
    std::ofstream(dir.path() / "image.png") << "x";
    try {
        read_document_dir(dir.path());
        FAIL();
    } catch (const RagError& e) {
        EXPECT_EQ(e.kind(), RagErrorKind::no_documents);
    }
}

TEST(RagAgent, RetrieveDocsShapeAndEmptyIndex) {
    HashEmbedder embedder(32);
    VectorIndex index(32, embedder.id());
    RagAgent agent(embedder, index);
    try {
        agent.retrieve_docs("anything");
        FAIL();
    } catch (const ToolError& e) {
        EXPECT_EQ(e.kind(), ErrorType::not_found);
    }
    std::size_t total = 0;
    for (const auto& doc : read_document_dir(fixture_path("docs"))) total += agent.ingest(doc);
    EXPECT_EQ(index.size(), total);
    auto out = agent.retrieve_docs("What is the XYZ classifier?");
    ASSERT_EQ(out["sources"].size(), 5u);
    EXPECT_EQ(out["context"].get<std::string>().rfind(context_header, 0), 0u);
    double prev = 2;
    for (const auto& s : out["sources"]) {
        EXPECT_LE(s["score"].get<double>(), prev);
        prev = s["score"];
        for (auto key : {"title", "ordinal", "chunk_id"}) EXPECT_TRUE(s.contains(key));
    }
    // Re-ingesting is idempotent.
    for (const auto& doc : read_document_dir(fixture_path("docs"))) agent.ingest(doc);
    EXPECT_EQ(index.size(), total);

    orch::ToolRegistry registry;
    register_rag_tools(registry, agent);
    EXPECT_EQ(registry.size(), 1u);
    EXPECT_TRUE(registry.find("retrieve_docs"));
}

TEST(Chunker, DisjointHalvesSplitAtTheTopicBoundary) {
    HashEmbedder embedder(32);
    const std::vector<std::string> a{"kernel", "margin", "support", "vector", "hyperplane"};
    const std::vector<std::string> b{"bucket", "object", "prefix", "storage", "upload"};
    std::mt19937 rng(41);
    auto half = [&](const std::vector<std::string>& vocab) {
        std::vector<std::string> sentences;
        for (int s = 0; s < 6; ++s) {
            auto words = vocab;
            std::shuffle(words.begin(), words.end(), rng);
            std::string text = "Topic";
            for (const auto& w : words) text += " " + w;
            sentences.push_back(text + ".");
        }
        return sentences;
    };
    auto sentences = half(a);
    auto second = half(b);
    sentences.insert(sentences.end(), second.begin(), second.end());

    // Reference breakpoints straight from the definition.
    std::vector<double> distances;
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i)
        distances.push_back(1.0 - dot(embedder.embed(sentences[i]), embedder.embed(sentences[i + 1])));
    double threshold = percentile(distances, 95);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < distances.size(); ++i)
        if (distances[i] > threshold) expected.push_back(i);
    ASSERT_EQ(expected, (std::vector<std::size_t>{5}));

    auto chunks = chunk_document({"halves", join(sentences), ""}, embedder);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].text, join({sentences.begin(), sentences.begin() + 6}));
    EXPECT_EQ(chunks[1].text, join({sentences.begin() + 6, sentences.end()}));
}

TEST(HashEmbedder, DisjointVocabulariesAreNearlyOrthogonal) {
    HashEmbedder embedder(32);
    std::mt19937 rng(43);
    auto text = [&](char prefix) {
        std::string out;
        for (int i = 0, n = 3 + static_cast<int>(rng() % 8); i < n; ++i)
            out += std::string(1, prefix) + std::to_string(rng() % 1000) + " ";
        return out;
    };
    double sum = 0, max = -1;
    int above = 0;
    for (int i = 0; i < 100; ++i) {
        // Prefixes keep the two vocabularies disjoint.
        double c = dot(embedder.embed(text('p')), embedder.embed(text('q')));
        sum += std::abs(c);
        max = std::max(max, c);
        above += c >= 0.2;
    }
    // Per-pair < 0.2 cannot hold at d=32 (cosine sd ~ 1/sqrt(32)); the mean can.
    EXPECT_LT(sum / 100, 0.2);
    RecordProperty("max_cosine", std::to_string(max));
    RecordProperty("pairs_at_or_above_0.2", above);
    std::cout << "disjoint pairs: mean |cos| " << sum / 100 << ", max " << max << ", " << above << "/100 at or above 0.2\n";
}
