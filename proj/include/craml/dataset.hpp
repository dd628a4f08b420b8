#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/corpus.hpp"
#include "craml/extraction.hpp"
#include "craml/learning/metrics.hpp"
#include "craml/learning/model.hpp"
#include "craml/rules.hpp"

namespace craml {

/// Returns 0 without calling the model when the chunk holds none of the
/// keywords. `calls`, if given, counts model invocations.
std::uint8_t classify_chunk(std::string_view chunk, const ClassifierModel& model,
                            std::span<const std::string> keywords, std::atomic<std::size_t>* calls = nullptr);

struct PredictionRow {
    std::string doc_id;
    std::string chunk;
    std::vector<std::uint8_t> values;
};

struct GateStats {
    std::size_t chunks = 0;
    std::size_t gated = 0;  // skipped by the keyword gate
    std::size_t model_calls = 0;
};

struct Predictions {
    std::vector<std::string> tags;
    std::vector<PredictionRow> rows;  // doc_id order, then first occurrence
    std::string keywords_hash;
    std::string source;  // "models" or "rules"
    std::map<std::string, GateStats> stats;
    double seconds = 0.0;
};

/// Union of chunks from `<extract_dir>/<tag>/` for every registry tag.
/// Extracts, keyword config and models must share one keyword hash.
Predictions classify_corpus(const std::filesystem::path& extract_dir, const ModelRegistry& registry,
                            const KeywordConfig& keywords, std::size_t jobs = 1);

/// Same layout, labelled by the rule file instead (unset tags become 0).
Predictions classify_with_rules(const std::filesystem::path& extract_dir, const RuleSet& rules,
                                const KeywordConfig& keywords);

std::string predictions_to_csv(const Predictions& p);
void write_predictions(const Predictions& p, const std::filesystem::path& path);
Predictions read_predictions(const std::filesystem::path& path);

enum class Level { document, record };
Level parse_level(std::string_view text);
std::string_view to_string(Level level);

struct TagRow {
    std::string id;
    std::vector<std::string> meta;
    std::vector<std::uint8_t> values;
};

/// Rows sorted by id. At record level the first metadata column is
/// `n_documents` and the rest come from the record's first document.
struct TagTable {
    Level level = Level::document;
    std::vector<std::string> columns;
    std::vector<std::string> tags;
    std::vector<TagRow> rows;

    const TagRow* find(std::string_view id) const;
    std::optional<std::size_t> column(std::string_view name) const;
    std::optional<std::size_t> tag_index(std::string_view tag) const;

    bool operator==(const TagTable&) const = default;
};

inline bool operator==(const TagRow& a, const TagRow& b) {
    return a.id == b.id && a.meta == b.meta && a.values == b.values;
}

struct AggregateOptions {
    Level level = Level::document;
    /// Record ids to include even when no document references them.
    std::vector<std::string> extra_records;
};

struct AggregateResult {
    TagTable table;
    std::vector<std::string> orphans;  // predicted doc_ids missing from metadata
};

AggregateResult aggregate(const Predictions& predictions, const MetadataTable& metadata,
                          const AggregateOptions& options);

/// Document table -> record table (OR over documents).
TagTable roll_up(const TagTable& documents, const MetadataTable& metadata,
                 std::span<const std::string> extra_records = {});

std::string tag_table_to_csv(const TagTable& table);
TagTable parse_tag_table(std::string_view csv_text);
void write_tag_table(const TagTable& table, const std::filesystem::path& path);
TagTable read_tag_table(const std::filesystem::path& path);

struct TagMetrics {
    std::string tag;
    MetricsReport metrics;
};

/// `reference` is ground truth, `predicted` the candidate.
std::vector<TagMetrics> record_metrics(const TagTable& reference, const TagTable& predicted);

struct YearPoint {
    int year = 0;
    std::size_t records = 0;
    std::size_t tagged = 0;
    double percent = 0.0;
};

struct PrevalenceSeries {
    std::string tag;
    std::vector<YearPoint> points;
    std::size_t excluded = 0;  // unparseable dates
    bool partial_final_year = false;
};

/// Dates are YYYY-MM[-DD]. The last year is flagged partial when none of
/// its rows falls in December.
std::vector<PrevalenceSeries> prevalence_series(const TagTable& table, std::string_view date_column = "effective_date");
std::string prevalence_to_csv(std::span<const PrevalenceSeries> series);

}  // namespace craml
