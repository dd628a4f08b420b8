#include "craml/extrapolation.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_set>

namespace craml {

namespace fs = std::filesystem;

std::size_t dedup_key(const Rule& rule) {
    return static_cast<std::size_t>(rule.prio) * kPriorityWeight + rule.token_count();
}

bool TrainingRow::positive_any() const {
    return std::any_of(values.begin(), values.end(), [](std::uint8_t v) { return v == 1; });
}

std::optional<std::size_t> TrainingSet::tag_index(std::string_view tag) const {
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == tag) return i;
    }
    return std::nullopt;
}

std::size_t TrainingSet::require_tag(std::string_view tag) const {
    auto i = tag_index(tag);
    if (!i) fail_data("training set has no tag '" + std::string(tag) + "'");
    return *i;
}

namespace {

// One pass of the per-row, per-rule loop with the `plus` counter.
void extrapolate_row(const ChunkRow& row, bool sampled, const RuleSet& ruleset, const ExtrapolateOptions& options,
                     std::vector<TrainingRow>& out) {
    const double negative_cost = options.negative_ratio ? 1.0 / *options.negative_ratio
                                                        : static_cast<double>(ruleset.tags().size());
    const std::uint64_t row_seed = derive_seed(options.seed, fnv1a64(row.doc_id));
    std::vector<std::uint8_t> zeros(ruleset.tags().size(), 0);
    for (const auto& rule : ruleset.rules()) {
        struct Match {
            const std::string* chunk;
            bool positive;
        };
        std::vector<Match> matches;
        double plus = 0;
        for (const auto& x : row.chunks) {
            if (rule.matches(x)) {
                matches.push_back({&x, true});
                plus += 1;
            } else if (plus > 0 && options.negative_sampling && sampled) {
                if (!ruleset.any_match(x)) {
                    matches.push_back({&x, false});
                    plus -= negative_cost;
                }
            }
        }
        if (matches.empty()) continue;
        Rng rng(derive_seed(row_seed, rule.order));
        rng.shuffle(matches);
        for (const auto& m : matches) {
            TrainingRow tr;
            tr.doc_id = row.doc_id;
            tr.chunk = *m.chunk;
            if (m.positive) {
                tr.rule = rule.display();
                tr.pw_length = dedup_key(rule);
                tr.values.reserve(rule.values.size());
                for (const auto& v : rule.values) tr.values.push_back(v.value_or(0));
                tr.rule_order = rule.order;
                if (!sampled && !tr.positive_any()) continue;
            } else {
                tr.rule = std::string(kNegativeRule);
                tr.pw_length = 0;
                tr.values = zeros;
            }
            out.push_back(std::move(tr));
        }
    }
}

TrainingSet finish(std::vector<TrainingRow> rows, const RuleSet& ruleset, const ExtrapolateOptions& options) {
    std::stable_sort(rows.begin(), rows.end(), [](const TrainingRow& a, const TrainingRow& b) {
        if (a.pw_length != b.pw_length) return a.pw_length > b.pw_length;
        bool an = a.rule_order == static_cast<std::size_t>(-1);
        bool bn = b.rule_order == static_cast<std::size_t>(-1);
        if (an != bn) return bn;
        return a.rule_order > b.rule_order;
    });
    TrainingSet set;
    set.tags = ruleset.tags();
    set.ruleset_source = ruleset.source();
    set.ruleset_hash = ruleset.content_hash();
    set.rate = options.rate;
    set.seed = options.seed;
    set.negative_sampling = options.negative_sampling;
    set.augment_positives = options.augment_positives;
    std::unordered_set<std::string> seen;
    for (auto& r : rows) {
        if (seen.insert(r.chunk).second) set.rows.push_back(std::move(r));
    }
    if (set.rows.empty()) set.warnings.push_back("no chunk matched any rule; training set is empty");
    return set;
}

void check_options(const ExtrapolateOptions& options) {
    if (!(options.rate > 0.0 && options.rate <= 1.0)) fail_usage("sampling rate s must be in (0, 1]");
    if (options.negative_ratio && !(*options.negative_ratio > 0.0)) fail_usage("--neg-ratio must be positive");
}

}  // namespace

TrainingSet extrapolate_rows(std::span<const ChunkRow> rows, const RuleSet& ruleset,
                             const ExtrapolateOptions& options) {
    check_options(options);
    if (ruleset.rules().empty()) fail_data("empty rule set");
    std::vector<TrainingRow> out;
    for (const auto& row : rows) {
        bool sampled = keep_row(row.doc_id, options.rate, options.seed);
        if (!sampled && !options.augment_positives) continue;
        extrapolate_row(row, sampled, ruleset, options, out);
    }
    return finish(std::move(out), ruleset, options);
}

TrainingSet extrapolate(std::span<const fs::path> extract_files, const RuleSet& ruleset,
                        const ExtrapolateOptions& options) {
    check_options(options);
    if (ruleset.rules().empty()) fail_data("empty rule set");
    std::vector<std::vector<TrainingRow>> per_file(extract_files.size());
    std::vector<Provenance> provenance(extract_files.size());
    parallel_for(extract_files.size(), options.jobs, [&](std::size_t i) {
        ExtractFile f = read_extract_file(extract_files[i]);
        provenance[i] = f.provenance;
        for (const auto& r : f.rows) {
            bool sampled = keep_row(r.doc_id, options.rate, options.seed);
            if (!sampled && !options.augment_positives) continue;
            ChunkRow row{r.doc_id, r.chunks};
            extrapolate_row(row, sampled, ruleset, options, per_file[i]);
        }
    });
    std::vector<TrainingRow> all;
    for (auto& v : per_file) {
        all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    TrainingSet set = finish(std::move(all), ruleset, options);
    for (const auto& p : provenance) {
        if (set.keywords_hash.empty()) set.keywords_hash = p.get("keywords_hash");
        if (set.extract_tag.empty()) set.extract_tag = p.get("tag");
        if (!p.get("keywords_hash").empty() && p.get("keywords_hash") != set.keywords_hash) {
            fail_data("extract files were produced with different keyword configurations");
        }
    }
    return set;
}

std::string training_to_csv(const TrainingSet& set) {
    std::ostringstream out;
    Provenance p;
    p.artifact = "training";
    p.add("ruleset", set.ruleset_source);
    p.add("ruleset_hash", set.ruleset_hash);
    p.add("keywords_hash", set.keywords_hash);
    p.add("extract_tag", set.extract_tag);
    p.add("rate", format_fixed(set.rate, 6));
    p.add("seed", std::to_string(set.seed));
    p.add("negative_sampling", set.negative_sampling ? "1" : "0");
    p.add("augment_positives", set.augment_positives ? "1" : "0");
    p.add("rows", std::to_string(set.rows.size()));
    p.write(out);
    csv::Writer w(out);
    csv::Row header{"id", "chunk", "rule", "pw_length"};
    header.insert(header.end(), set.tags.begin(), set.tags.end());
    w.write(header);
    for (const auto& r : set.rows) {
        csv::Row row{r.doc_id, r.chunk, r.rule, std::to_string(r.pw_length)};
        for (auto v : r.values) row.push_back(v ? "1" : "0");
        w.write(row);
    }
    return std::move(out).str();
}

void write_training(const TrainingSet& set, const fs::path& path) { write_file(path, training_to_csv(set)); }

TrainingSet read_training(const fs::path& path) {
    csv::Table t = csv::read_table(path, {.delimiter = ','});
    if (t.header.size() < 5 || t.header[0] != "id" || t.header[1] != "chunk" || t.header[2] != "rule" ||
        t.header[3] != "pw_length") {
        fail_data(path.string() + ": training header must be id,chunk,rule,pw_length,<tags...>");
    }
    TrainingSet set;
    set.tags.assign(t.header.begin() + 4, t.header.end());
    const auto& p = t.provenance;
    set.ruleset_source = p.get("ruleset");
    set.ruleset_hash = p.get("ruleset_hash");
    set.keywords_hash = p.get("keywords_hash");
    set.extract_tag = p.get("extract_tag");
    set.rate = std::stod(p.get("rate", "1"));
    set.seed = std::stoull(p.get("seed", "0"));
    set.negative_sampling = p.get("negative_sampling") == "1";
    set.augment_positives = p.get("augment_positives") == "1";
    std::size_t line = 0;
    for (const auto& row : t.rows) {
        ++line;
        if (row.size() != t.header.size()) {
            fail_data(path.string() + ": training row " + std::to_string(line) + " has the wrong field count");
        }
        TrainingRow r;
        r.doc_id = row[0];
        r.chunk = row[1];
        r.rule = row[2];
        std::string_view pw = row[3];
        auto [ptr, ec] = std::from_chars(pw.data(), pw.data() + pw.size(), r.pw_length);
        if (ec != std::errc()) fail_data(path.string() + ": bad pw_length on row " + std::to_string(line));
        for (std::size_t i = 4; i < row.size(); ++i) {
            if (row[i] != "0" && row[i] != "1") {
                fail_data(path.string() + ": tag value must be 0 or 1 on row " + std::to_string(line));
            }
            r.values.push_back(row[i] == "1" ? 1 : 0);
        }
        set.rows.push_back(std::move(r));
    }
    return set;
}

}  // namespace craml
