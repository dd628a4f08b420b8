#include "craml/learning/metrics.hpp"

#include "craml/error.hpp"

namespace craml {

double f1_score(double precision, double recall) {
    double d = precision + recall;
    return d > 0 ? 2.0 * precision * recall / d : 0.0;
}

MetricsReport MetricsReport::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    MetricsReport m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    m.accuracy = ratio(tp + tn, m.total());
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

nlohmann::ordered_json MetricsReport::to_json() const {
    return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1},
            {"tp", tp},             {"fp", fp},               {"fn", fn},         {"tn", tn}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    return from_counts(j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>(),
                       j.at("tn").get<std::size_t>());
}

MetricsReport evaluate(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) fail_data("evaluate: predictions and labels differ in length");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bool p = predictions[i] != 0;
        bool l = labels[i] != 0;
        if (p && l) ++tp;
        else if (p) ++fp;
        else if (l) ++fn;
        else ++tn;
    }
    return MetricsReport::from_counts(tp, fp, fn, tn);
}

}  // namespace craml
