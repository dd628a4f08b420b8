#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

namespace craml {

double f1_score(double precision, double recall);

struct MetricsReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static MetricsReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
    std::size_t total() const { return tp + fp + fn + tn; }

    nlohmann::ordered_json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// Positive class is 1.
MetricsReport evaluate(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

}  // namespace craml
