#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace craml {

enum class Centering { keyword, midpoint };

Centering parse_centering(std::string_view text);
std::string_view to_string(Centering c);

struct NgramRow {
    std::string ngram;
    std::size_t count = 0;
};

struct NgramReport {
    std::vector<NgramRow> rows;  // count descending, then ngram ascending
    std::size_t windows = 0;
    std::size_t malformed = 0;
    std::size_t keyword_fallbacks = 0;  // keyword mode chunks centred on the midpoint
};

/// Midpoint mode slices tokens[max(0, L/2 - n), min(L, L/2 + n)) with floor
/// division. Keyword mode slices n tokens either side of the keyword token,
/// falling back to midpoint when no keyword is found in the chunk.
std::string centered_slice(std::span<const std::string> tokens, std::size_t n, Centering centering,
                           std::optional<std::size_t> keyword_index);

NgramReport ngram_explore(std::span<const std::filesystem::path> extract_files, std::size_t n,
                          Centering centering, std::span<const std::string> keywords,
                          std::size_t jobs = 1);

void write_ngram_report(const NgramReport& report, const std::filesystem::path& path,
                        std::size_t n, Centering centering);

}  // namespace craml
