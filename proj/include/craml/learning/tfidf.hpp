#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace craml {

/// Sparse row; indices strictly increasing.
struct SparseVec {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const { return index.size(); }
    double at(std::uint32_t feature) const;
};

/// Bag-of-words TF-IDF with smoothed idf, ln((1+n)/(1+df)) + 1, and L2
/// normalized rows.
class Vectorizer {
public:
    static Vectorizer fit(std::span<const std::string> chunks);

    SparseVec transform(std::string_view chunk) const;
    std::vector<SparseVec> transform(std::span<const std::string> chunks) const;

    std::size_t size() const { return terms_.size(); }
    const std::vector<std::string>& terms() const { return terms_; }
    const std::vector<double>& idf() const { return idf_; }
    const std::string& fitted_hash() const { return fitted_hash_; }

    nlohmann::ordered_json to_json() const;
    static Vectorizer from_json(const nlohmann::json& j);

private:
    std::vector<std::string> terms_;  // sorted
    std::vector<double> idf_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::string fitted_hash_;
};

}  // namespace craml
