#include "craml/learning/tfidf.hpp"

#include "craml/error.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace craml {

double SparseVec::at(std::uint32_t feature) const {
    auto it = std::lower_bound(index.begin(), index.end(), feature);
    if (it == index.end() || *it != feature) return 0.0;
    return value[static_cast<std::size_t>(it - index.begin())];
}

Vectorizer Vectorizer::fit(std::span<const std::string> chunks) {
    std::map<std::string, std::size_t, std::less<>> df;
    std::uint64_t h = fnv1a64("tfidf");
    for (const auto& c : chunks) {
        h = fnv1a64(c, h);
        h = fnv1a64("\n", h);
        std::set<std::string_view> seen;
        for (auto t : tokenize_view(c)) {
            if (seen.insert(t).second) ++df[std::string(t)];
        }
    }
    if (df.empty()) fail_data("tf-idf: vocabulary is empty (all chunks blank)");
    Vectorizer v;
    const double n = static_cast<double>(chunks.size());
    for (const auto& [term, count] : df) {
        v.index_.emplace(term, static_cast<std::uint32_t>(v.terms_.size()));
        v.terms_.push_back(term);
        v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    v.fitted_hash_ = hex64(h);
    return v;
}

SparseVec Vectorizer::transform(std::string_view chunk) const {
    std::map<std::uint32_t, double> tf;
    for (auto t : tokenize_view(chunk)) {
        auto it = index_.find(std::string(t));
        if (it != index_.end()) tf[it->second] += 1.0;
    }
    SparseVec out;
    double norm = 0.0;
    for (auto& [i, c] : tf) {
        c *= idf_[i];
        norm += c * c;
    }
    norm = std::sqrt(norm);
    out.index.reserve(tf.size());
    out.value.reserve(tf.size());
    for (const auto& [i, c] : tf) {
        out.index.push_back(i);
        out.value.push_back(c / norm);
    }
    return out;
}

std::vector<SparseVec> Vectorizer::transform(std::span<const std::string> chunks) const {
    std::vector<SparseVec> out;
    out.reserve(chunks.size());
    for (const auto& c : chunks) out.push_back(transform(c));
    return out;
}

nlohmann::ordered_json Vectorizer::to_json() const {
    nlohmann::ordered_json j;
    j["fitted_hash"] = fitted_hash_;
    j["terms"] = terms_;
    j["idf"] = idf_;
    return j;
}

Vectorizer Vectorizer::from_json(const nlohmann::json& j) {
    Vectorizer v;
    v.fitted_hash_ = j.at("fitted_hash").get<std::string>();
    v.terms_ = j.at("terms").get<std::vector<std::string>>();
    v.idf_ = j.at("idf").get<std::vector<double>>();
    if (v.terms_.size() != v.idf_.size()) fail_data("vectorizer: vocabulary and idf sizes differ");
    for (std::size_t i = 0; i < v.terms_.size(); ++i) {
        if (!std::isfinite(v.idf_[i]) || v.idf_[i] < 0) fail_data("vectorizer: invalid idf value");
        if (!v.index_.emplace(v.terms_[i], static_cast<std::uint32_t>(i)).second) {
            fail_data("vectorizer: duplicate term '" + v.terms_[i] + "'");
        }
    }
    return v;
}

}  // namespace craml
