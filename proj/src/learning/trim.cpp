#include "craml/learning/trim.hpp"

#include "craml/extraction.hpp"
#include "craml/util.hpp"

#include <algorithm>

namespace craml {

nlohmann::ordered_json TrimConfig::to_json() const {
    return {{"trim", trim}, {"qualifiers", qualifiers}, {"keeps", keeps}, {"keywords", keywords}};
}

TrimConfig TrimConfig::from_json(const nlohmann::json& j) {
    TrimConfig c;
    c.trim = j.at("trim").get<std::size_t>();
    auto lower = [](std::vector<std::string> v) {
        for (auto& s : v) s = to_lower_ascii(craml::trim(s));
        return v;
    };
    c.qualifiers = lower(j.value("qualifiers", std::vector<std::string>{}));
    c.keeps = lower(j.value("keeps", std::vector<std::string>{}));
    c.keywords = lower(j.value("keywords", std::vector<std::string>{}));
    return c;
}

namespace {

bool has_sequence(const std::vector<std::string>& tokens, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > tokens.size()) return false;
    return std::search(tokens.begin(), tokens.end(), needle.begin(), needle.end()) != tokens.end();
}

void prepend_found(const std::vector<std::string>& tokens, const std::vector<std::string>& words,
                   std::vector<std::string>& out) {
    for (const auto& w : words) {
        auto needle = tokenize(w);
        if (has_sequence(tokens, needle)) out.insert(out.end(), needle.begin(), needle.end());
    }
}

}  // namespace

std::optional<std::string> trim_chunk(std::string_view chunk, const TrimConfig& config) {
    auto k = locate_keyword(chunk, config.keywords);
    if (!k) return std::nullopt;
    auto tokens = tokenize(chunk);
    std::vector<std::string> out;
    prepend_found(tokens, config.qualifiers, out);
    prepend_found(tokens, config.keeps, out);
    std::size_t lo = *k >= config.trim ? *k - config.trim : 0;
    std::size_t hi = std::min(tokens.size(), *k + config.trim + 1);
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(lo), tokens.begin() + static_cast<std::ptrdiff_t>(hi));
    return join(out, " ");
}

TrainingSet trim_preprocess(const TrainingSet& training, const TrimConfig& config) {
    TrainingSet out = training;
    std::size_t untrimmed = 0;
    for (auto& row : out.rows) {
        if (auto t = trim_chunk(row.chunk, config)) row.chunk = std::move(*t);
        else ++untrimmed;
    }
    if (untrimmed) {
        out.warnings.push_back(std::to_string(untrimmed) + " row(s) without a keyword were left untrimmed");
    }
    return out;
}

}  // namespace craml
