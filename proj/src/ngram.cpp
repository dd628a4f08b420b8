#include "craml/ngram.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

namespace craml {

namespace fs = std::filesystem;

Centering parse_centering(std::string_view text) {
    if (text == "keyword") return Centering::keyword;
    if (text == "midpoint") return Centering::midpoint;
    fail_usage("--center must be 'keyword' or 'midpoint'");
}

std::string_view to_string(Centering c) { return c == Centering::keyword ? "keyword" : "midpoint"; }

std::string centered_slice(std::span<const std::string> tokens, std::size_t n, Centering centering,
                           std::optional<std::size_t> keyword_index) {
    const std::size_t len = tokens.size();
    std::size_t lo = 0;
    std::size_t hi = 0;
    if (centering == Centering::keyword && keyword_index && *keyword_index < len) {
        std::size_t k = *keyword_index;
        lo = k >= n ? k - n : 0;
        hi = std::min(len, k + n + 1);
    } else {
        std::size_t mid = len / 2;
        lo = mid >= n ? mid - n : 0;
        hi = std::min(len, mid + n);
    }
    return join(tokens.subspan(lo, hi - lo), " ");
}

NgramReport ngram_explore(std::span<const fs::path> extract_files, std::size_t n, Centering centering,
                          std::span<const std::string> keywords, std::size_t jobs) {
    if (n < 1) fail_usage("n-gram size must be >= 1");
    struct Partial {
        std::unordered_map<std::string, std::size_t> counts;
        std::size_t windows = 0;
        std::size_t malformed = 0;
        std::size_t fallbacks = 0;
    };
    std::vector<Partial> partials(extract_files.size());
    parallel_for(extract_files.size(), jobs, [&](std::size_t i) {
        Partial& p = partials[i];
        ExtractFile f = read_extract_file(extract_files[i]);
        p.malformed = f.malformed;
        for (const auto& row : f.rows) {
            for (const auto& chunk : row.chunks) {
                auto tokens = tokenize(chunk);
                if (tokens.empty()) continue;
                std::optional<std::size_t> kw;
                if (centering == Centering::keyword) {
                    kw = locate_keyword(chunk, keywords);
                    if (!kw) ++p.fallbacks;
                }
                ++p.counts[centered_slice(tokens, n, centering, kw)];
                ++p.windows;
            }
        }
    });
    std::unordered_map<std::string, std::size_t> merged;
    NgramReport report;
    for (auto& p : partials) {
        for (auto& [k, v] : p.counts) merged[k] += v;
        report.windows += p.windows;
        report.malformed += p.malformed;
        report.keyword_fallbacks += p.fallbacks;
    }
    report.rows.reserve(merged.size());
    for (auto& [k, v] : merged) report.rows.push_back({k, v});
    std::sort(report.rows.begin(), report.rows.end(), [](const NgramRow& a, const NgramRow& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.ngram < b.ngram;
    });
    return report;
}

void write_ngram_report(const NgramReport& report, const fs::path& path, std::size_t n, Centering centering) {
    Provenance p;
    p.artifact = "ngrams";
    p.add("n", std::to_string(n));
    p.add("center", std::string(to_string(centering)));
    p.add("windows", std::to_string(report.windows));
    csv::FileWriter w(path, &p);
    w.write({"ngram", "count"});
    for (const auto& r : report.rows) w.write({r.ngram, std::to_string(r.count)});
    w.close();
}

}  // namespace craml
