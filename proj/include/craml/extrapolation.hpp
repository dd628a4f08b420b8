#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/rules.hpp"

namespace craml {

inline constexpr std::string_view kNegativeRule = "NEGATIVE";
inline constexpr std::size_t kPriorityWeight = 10000;

/// Priority-weighted length: prio * 10,000 + rule token count.
std::size_t dedup_key(const Rule& rule);

struct TrainingRow {
    std::string doc_id;
    std::string chunk;
    std::string rule;  // catching rule as written, or NEGATIVE
    std::size_t pw_length = 0;
    std::vector<std::uint8_t> values;
    std::size_t rule_order = static_cast<std::size_t>(-1);  // not serialized

    bool negative() const { return rule == kNegativeRule; }
    bool positive_any() const;
};

struct TrainingSet {
    std::vector<std::string> tags;
    std::vector<TrainingRow> rows;
    std::string ruleset_source;
    std::string ruleset_hash;
    std::string keywords_hash;
    std::string extract_tag;
    double rate = 1.0;
    std::uint64_t seed = 0;
    bool negative_sampling = false;
    bool augment_positives = false;
    std::vector<std::string> warnings;

    std::optional<std::size_t> tag_index(std::string_view tag) const;
    std::size_t require_tag(std::string_view tag) const;
};

struct ExtrapolateOptions {
    double rate = 1.0;
    bool negative_sampling = false;
    /// Negatives admitted per positive. Unset keeps the original bookkeeping
    /// where each negative costs one unit per tag in the rule file.
    std::optional<double> negative_ratio;
    /// Keep every positive chunk from rows the sampler skipped.
    bool augment_positives = false;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

TrainingSet extrapolate(std::span<const std::filesystem::path> extract_files, const RuleSet& ruleset,
                        const ExtrapolateOptions& options);

/// Extrapolation over in-memory rows (id, chunks); used by previews.
struct ChunkRow {
    std::string doc_id;
    std::vector<std::string> chunks;
};
TrainingSet extrapolate_rows(std::span<const ChunkRow> rows, const RuleSet& ruleset,
                             const ExtrapolateOptions& options);

void write_training(const TrainingSet& set, const std::filesystem::path& path);
std::string training_to_csv(const TrainingSet& set);
TrainingSet read_training(const std::filesystem::path& path);

}  // namespace craml
