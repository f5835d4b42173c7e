#include "swarm/minio/metrics.hpp"

#include "swarm/orchestrator/error_envelope.hpp"

#include <cmath>

namespace swarm::minio {

using nlohmann::json;

DerivedMetrics compute_metrics_from_confusion(const ConfusionMatrix& m) {
    if (m.total() == 0) throw ToolError(ErrorType::invalid_argument, "confusion matrix is all zero");
    DerivedMetrics out;
    auto ratio = [&](double num, double den) {
        if (den == 0) {
            out.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    double tp = m.tp(), tn = m.tn(), fp = m.fp(), fn = m.fn();
    out.accuracy = (tp + tn) / static_cast<double>(m.total());
    out.precision = ratio(tp, tp + fp);
    out.recall = ratio(tp, tp + fn);
    out.f1 = ratio(2 * out.precision * out.recall, out.precision + out.recall);
    return out;
}

json to_json(const ConfusionMatrix& m) {
    return json::array({json::array({m.tn(), m.fp()}), json::array({m.fn(), m.tp()})});
}

ConfusionMatrix confusion_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ToolError(ErrorType::internal, "confusion_matrix must be 2x2");
    ConfusionMatrix m;
    for (std::size_t r = 0; r < 2; ++r) {
        if (!j[r].is_array() || j[r].size() != 2) throw ToolError(ErrorType::internal, "confusion_matrix must be 2x2");
        for (std::size_t c = 0; c < 2; ++c) {
            if (!j[r][c].is_number_unsigned())
                throw ToolError(ErrorType::internal, "confusion_matrix cells must be non-negative integers");
            m.cells[r][c] = j[r][c].get<std::uint64_t>();
        }
    }
    return m;
}

json ModelMetrics::to_json() const {
    json j{{"accuracy", accuracy},
           {"precision", precision},
           {"recall", recall},
           {"f1", f1},
           {"auc", auc ? json(*auc) : json(nullptr)},
           {"confusion_matrix", minio::to_json(confusion)},
           {"source", {{"pipeline_name", source.pipeline_name}, {"run_id", source.run_id}, {"object_key", source.object_key}}}};
    return j;
}

ModelMetrics parse_model_metrics(std::string_view body, MetricsSource source) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ToolError(ErrorType::internal, "malformed metrics JSON at " + source.object_key + ": " + e.what());
    }
    if (!j.is_object()) throw ToolError(ErrorType::internal, "metrics JSON is not an object: " + source.object_key);

    ModelMetrics m;
    m.source = std::move(source);
    auto fraction = [&](const char* name) {
        if (!j.contains(name) || !j[name].is_number())
            throw ToolError(ErrorType::internal, std::string("metrics JSON lacks numeric ") + name);
        double v = j[name].get<double>();
        if (!(v >= 0 && v <= 1))
            throw ToolError(ErrorType::invalid_argument, std::string(name) + " outside [0, 1]", {{"metric", name}});
        return v;
    };
    m.accuracy = fraction("accuracy");
    m.precision = fraction("precision");
    m.recall = fraction("recall");
    m.f1 = fraction("f1");
    if (j.contains("auc") && !j["auc"].is_null()) m.auc = fraction("auc");
    if (!j.contains("confusion_matrix")) throw ToolError(ErrorType::internal, "metrics JSON lacks confusion_matrix");
    m.confusion = confusion_from_json(j["confusion_matrix"]);

    auto derived = compute_metrics_from_confusion(m.confusion);
    const std::pair<const char*, std::pair<double, double>> checks[] = {
        {"accuracy", {m.accuracy, derived.accuracy}},
        {"precision", {m.precision, derived.precision}},
        {"recall", {m.recall, derived.recall}},
        {"f1", {m.f1, derived.f1}},
    };
    for (const auto& [name, values] : checks) {
        auto [stored, computed] = values;
        if (std::abs(stored - computed) > metrics_tolerance)
            throw ToolError(ErrorType::invalid_argument,
                            std::string(name) + " " + std::to_string(stored) + " is inconsistent with the confusion matrix (" +
                                std::to_string(computed) + ")",
                            {{"metric", name}, {"stored", stored}, {"computed", computed}, {"object_key", m.source.object_key}});
    }
    return m;
}

} // namespace swarm::minio
