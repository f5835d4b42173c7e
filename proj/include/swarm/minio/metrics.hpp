#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace swarm::minio {

/// Binary confusion matrix: rows are the actual class, columns the predicted
/// class, both ordered {negative, positive}: [[TN, FP], [FN, TP]].
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, 2>, 2> cells{};

    std::uint64_t tn() const { return cells[0][0]; }
    std::uint64_t fp() const { return cells[0][1]; }
    std::uint64_t fn() const { return cells[1][0]; }
    std::uint64_t tp() const { return cells[1][1]; }
    std::uint64_t total() const { return tn() + fp() + fn() + tp(); }

    bool operator==(const ConfusionMatrix&) const = default;
};

struct DerivedMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    /// Set when some ratio had a zero denominator and was reported as 0.
    bool degenerate = false;
};

/// Throws ToolError{invalid_argument} for an all-zero matrix.
DerivedMetrics compute_metrics_from_confusion(const ConfusionMatrix& m);

/// Stored metrics may drift from the matrix by at most this much.
inline constexpr double metrics_tolerance = 0.001;

struct MetricsSource {
    std::string pipeline_name;
    std::string run_id;
    std::string object_key;
};

struct ModelMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::optional<double> auc;  // not derivable from the matrix, so never checked against it
    ConfusionMatrix confusion;
    MetricsSource source;

    nlohmann::json to_json() const;
};

ConfusionMatrix confusion_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConfusionMatrix& m);

/// Parses a metrics.json body and enforces the invariants: every metric in
/// [0, 1] and accuracy/precision/recall/f1 within metrics_tolerance of the
/// matrix. Malformed JSON raises ToolError{internal}; a violated invariant
/// raises ToolError{invalid_argument} naming the metric.
ModelMetrics parse_model_metrics(std::string_view body, MetricsSource source);

} // namespace swarm::minio
