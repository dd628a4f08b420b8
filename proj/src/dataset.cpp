#include "craml/dataset.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace craml {

std::uint8_t classify_chunk(std::string_view chunk, const ClassifierModel& model,
                            std::span<const std::string> keywords, std::atomic<std::size_t>* calls) {
    if (chunk.empty() || !contains_keyword(chunk, keywords)) return 0;
    if (calls) ++*calls;
    return model.predict(chunk);
}

namespace {

struct DocChunks {
    std::string doc_id;
    std::vector<std::string> chunks;
};

std::vector<DocChunks> collect_chunks(const std::filesystem::path& extract_dir, std::span<const std::string> tags,
                                      const KeywordConfig& keywords) {
    std::map<std::string, DocChunks> docs;
    std::unordered_map<std::string, std::unordered_set<std::string>> seen;
    for (const auto& tag : tags) {
        if (!keywords.has_tag(tag)) fail_data("keyword config has no tag '" + tag + "'");
        auto dir = extract_dir / tag;
        if (!std::filesystem::is_directory(dir)) {
            fail_state("no extracts for tag '" + tag + "' under " + extract_dir.string() + " (run extract first)");
        }
        auto files = list_extract_files(dir);
        for_each_extract_row(files, [&](const ExtractFile& f, const ExtractRow& row) {
            auto h = f.provenance.get("keywords_hash");
            if (h != keywords.hash()) {
                fail_data(f.path.string() + ": keyword hash " + h + " does not match the keyword config (" +
                          keywords.hash() + ")");
            }
            auto& d = docs[row.doc_id];
            d.doc_id = row.doc_id;
            auto& s = seen[row.doc_id];
            for (const auto& c : row.chunks) {
                if (s.insert(c).second) d.chunks.push_back(c);
            }
        });
    }
    std::vector<DocChunks> out;
    out.reserve(docs.size());
    for (auto& [id, d] : docs) out.push_back(std::move(d));
    return out;
}

}  // namespace

Predictions classify_corpus(const std::filesystem::path& extract_dir, const ModelRegistry& registry,
                            const KeywordConfig& keywords, std::size_t jobs) {
    auto start = std::chrono::steady_clock::now();
    Predictions p;
    p.tags = registry.tags();
    p.keywords_hash = keywords.hash();
    p.source = "models";
    std::vector<ClassifierModel> models;
    for (const auto& tag : p.tags) {
        models.push_back(registry.load_model(tag));
        const auto& m = models.back();
        if (m.tag != tag) fail_data("registry maps tag '" + tag + "' to a model for '" + m.tag + "'");
        if (!m.keywords_hash.empty() && m.keywords_hash != keywords.hash()) {
            fail_data("model for tag '" + tag + "' was trained under keyword hash " + m.keywords_hash +
                      ", not " + keywords.hash());
        }
    }
    auto docs = collect_chunks(extract_dir, p.tags, keywords);

    std::size_t total = 0;
    std::vector<std::size_t> offset;
    for (const auto& d : docs) {
        offset.push_back(total);
        total += d.chunks.size();
    }
    p.rows.resize(total);
    std::vector<std::atomic<std::size_t>> calls(p.tags.size());
    std::vector<std::atomic<std::size_t>> gated(p.tags.size());
    parallel_for(docs.size(), jobs, [&](std::size_t di) {
        const auto& d = docs[di];
        for (std::size_t c = 0; c < d.chunks.size(); ++c) {
            PredictionRow& row = p.rows[offset[di] + c];
            row.doc_id = d.doc_id;
            row.chunk = d.chunks[c];
            row.values.resize(p.tags.size());
            for (std::size_t t = 0; t < p.tags.size(); ++t) {
                const auto& kws = keywords.keywords_for(p.tags[t]);
                if (!contains_keyword(row.chunk, kws)) ++gated[t];
                row.values[t] = classify_chunk(row.chunk, models[t], kws, &calls[t]);
            }
        }
    });
    for (std::size_t t = 0; t < p.tags.size(); ++t) p.stats[p.tags[t]] = {total, gated[t].load(), calls[t].load()};
    p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return p;
}

Predictions classify_with_rules(const std::filesystem::path& extract_dir, const RuleSet& rules,
                                const KeywordConfig& keywords) {
    Predictions p;
    p.tags = rules.tags();
    p.keywords_hash = keywords.hash();
    p.source = "rules";
    std::vector<std::string> tags;
    for (const auto& t : p.tags) {
        if (keywords.has_tag(t)) tags.push_back(t);
    }
    auto docs = collect_chunks(extract_dir, tags, keywords);
    for (const auto& d : docs) {
        for (const auto& c : d.chunks) {
            RuleOutcome o = apply_rules(c, rules);
            PredictionRow row{d.doc_id, c, {}};
            for (std::size_t t = 0; t < p.tags.size(); ++t) row.values.push_back(o.value(t));
            p.rows.push_back(std::move(row));
        }
    }
    for (const auto& t : p.tags) p.stats[t] = {p.rows.size(), 0, 0};
    return p;
}

std::string predictions_to_csv(const Predictions& p) {
    std::ostringstream out;
    Provenance prov;
    prov.artifact = "predictions";
    prov.add("source", p.source).add("keywords_hash", p.keywords_hash).add("rows", std::to_string(p.rows.size()));
    prov.write(out);
    csv::Writer w(out);
    csv::Row header{"id", "chunk"};
    header.insert(header.end(), p.tags.begin(), p.tags.end());
    w.write(header);
    for (const auto& r : p.rows) {
        csv::Row row{r.doc_id, r.chunk};
        for (auto v : r.values) row.push_back(v ? "1" : "0");
        w.write(row);
    }
    return std::move(out).str();
}

void write_predictions(const Predictions& p, const std::filesystem::path& path) {
    write_file(path, predictions_to_csv(p));
}

Predictions read_predictions(const std::filesystem::path& path) {
    csv::Table t = csv::read_table(path, {.delimiter = ','});
    if (t.header.size() < 3 || t.header[0] != "id" || t.header[1] != "chunk") {
        fail_data(path.string() + ": predictions header must be id,chunk,<tags...>");
    }
    Predictions p;
    p.tags.assign(t.header.begin() + 2, t.header.end());
    p.keywords_hash = t.provenance.get("keywords_hash");
    p.source = t.provenance.get("source");
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) fail_data(path.string() + ": malformed predictions row");
        PredictionRow r{row[0], row[1], {}};
        for (std::size_t i = 2; i < row.size(); ++i) {
            if (row[i] != "0" && row[i] != "1") fail_data(path.string() + ": non-binary prediction '" + row[i] + "'");
            r.values.push_back(row[i] == "1");
        }
        p.rows.push_back(std::move(r));
    }
    return p;
}

Level parse_level(std::string_view text) {
    if (text == "document") return Level::document;
    if (text == "record") return Level::record;
    fail_usage("unknown level '" + std::string(text) + "' (expected document or record)");
}

std::string_view to_string(Level level) { return level == Level::document ? "document" : "record"; }

const TagRow* TagTable::find(std::string_view id) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), id, [](const TagRow& r, std::string_view v) { return r.id < v; });
    return it != rows.end() && it->id == id ? &*it : nullptr;
}

std::optional<std::size_t> TagTable::column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
}

std::optional<std::size_t> TagTable::tag_index(std::string_view tag) const {
    auto it = std::find(tags.begin(), tags.end(), tag);
    if (it == tags.end()) return std::nullopt;
    return static_cast<std::size_t>(it - tags.begin());
}

AggregateResult aggregate(const Predictions& predictions, const MetadataTable& metadata,
                          const AggregateOptions& options) {
    AggregateResult result;
    TagTable& docs = result.table;
    docs.level = Level::document;
    docs.columns = metadata.columns();
    docs.tags = predictions.tags;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& id : metadata.doc_ids()) {
        index.emplace(id, docs.rows.size());
        docs.rows.push_back({id, *metadata.find(id), std::vector<std::uint8_t>(docs.tags.size(), 0)});
    }
    std::set<std::string> orphans;
    for (const auto& p : predictions.rows) {
        auto it = index.find(p.doc_id);
        if (it == index.end()) {
            orphans.insert(p.doc_id);
            continue;
        }
        auto& values = docs.rows[it->second].values;
        for (std::size_t t = 0; t < values.size(); ++t) values[t] |= p.values[t];
    }
    result.orphans.assign(orphans.begin(), orphans.end());
    if (options.level == Level::record) result.table = roll_up(docs, metadata, options.extra_records);
    return result;
}

TagTable roll_up(const TagTable& documents, const MetadataTable& metadata, std::span<const std::string> extra_records) {
    if (documents.level != Level::document) fail_data("roll_up expects a document-level table");
    auto rec_col = std::find(metadata.columns().begin(), metadata.columns().end(), "record_id");
    if (rec_col == metadata.columns().end()) fail_data("metadata has no record_id column");

    TagTable out;
    out.level = Level::record;
    out.tags = documents.tags;
    out.columns.push_back("n_documents");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < documents.columns.size(); ++i) {
        if (documents.columns[i] == "record_id") continue;
        keep.push_back(i);
        out.columns.push_back(documents.columns[i]);
    }
    std::map<std::string, TagRow> records;
    std::map<std::string, std::size_t> counts;
    for (const auto& d : documents.rows) {
        if (!metadata.contains(d.id)) fail_data("document '" + d.id + "' is not in the metadata");
        std::string rec = metadata.record_id(d.id);
        if (rec.empty()) rec = d.id;
        auto [it, fresh] = records.try_emplace(rec);
        TagRow& r = it->second;
        if (fresh) {
            r.id = rec;
            r.meta.push_back("");
            for (auto i : keep) r.meta.push_back(d.meta[i]);
            r.values.assign(out.tags.size(), 0);
        }
        ++counts[rec];
        for (std::size_t t = 0; t < r.values.size(); ++t) r.values[t] |= d.values[t];
    }
    for (const auto& rec : extra_records) {
        auto [it, fresh] = records.try_emplace(rec);
        if (fresh) {
            it->second.id = rec;
            it->second.meta.assign(out.columns.size(), "");
            it->second.values.assign(out.tags.size(), 0);
        }
    }
    for (auto& [id, r] : records) {
        r.meta[0] = std::to_string(counts[id]);
        out.rows.push_back(std::move(r));
    }
    return out;
}

std::string tag_table_to_csv(const TagTable& table) {
    std::ostringstream out;
    Provenance prov;
    prov.artifact = "tagtable";
    prov.add("level", std::string(to_string(table.level)))
        .add("tags", join(table.tags, ";"))
        .add("rows", std::to_string(table.rows.size()));
    prov.write(out);
    csv::Writer w(out);
    csv::Row header{"id"};
    header.insert(header.end(), table.columns.begin(), table.columns.end());
    header.insert(header.end(), table.tags.begin(), table.tags.end());
    w.write(header);
    for (const auto& r : table.rows) {
        csv::Row row{r.id};
        row.insert(row.end(), r.meta.begin(), r.meta.end());
        for (auto v : r.values) row.push_back(v ? "1" : "0");
        w.write(row);
    }
    return std::move(out).str();
}

TagTable parse_tag_table(std::string_view csv_text) {
    csv::Table t = csv::parse_table(csv_text, {.delimiter = ','});
    if (t.provenance.artifact != "tagtable") fail_data("not a tag table (missing provenance header)");
    TagTable out;
    out.level = parse_level(t.provenance.get("level"));
    std::string tags = t.provenance.get("tags");
    if (!tags.empty()) out.tags = split(tags, ';');
    if (t.header.empty() || t.header[0] != "id" || t.header.size() < 1 + out.tags.size()) {
        fail_data("tag table header does not match its provenance");
    }
    std::size_t n_meta = t.header.size() - 1 - out.tags.size();
    out.columns.assign(t.header.begin() + 1, t.header.begin() + 1 + static_cast<std::ptrdiff_t>(n_meta));
    for (std::size_t i = 0; i < out.tags.size(); ++i) {
        if (t.header[1 + n_meta + i] != out.tags[i]) fail_data("tag table header does not match its provenance");
    }
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) fail_data("tag table: malformed row");
        TagRow r;
        r.id = row[0];
        r.meta.assign(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(n_meta));
        for (std::size_t i = 1 + n_meta; i < row.size(); ++i) {
            if (row[i] != "0" && row[i] != "1") fail_data("tag table: non-binary tag value '" + row[i] + "'");
            r.values.push_back(row[i] == "1");
        }
        out.rows.push_back(std::move(r));
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const TagRow& a, const TagRow& b) { return a.id < b.id; });
    return out;
}

void write_tag_table(const TagTable& table, const std::filesystem::path& path) {
    write_file(path, tag_table_to_csv(table));
}

TagTable read_tag_table(const std::filesystem::path& path) {
    try {
        return parse_tag_table(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::data) fail_data(path.string() + ": " + e.what());
        throw;
    }
}

std::vector<TagMetrics> record_metrics(const TagTable& reference, const TagTable& predicted) {
    if (reference.level != predicted.level) fail_data("record_metrics: tables are at different levels");
    std::vector<std::string> missing;
    for (const auto& r : reference.rows) {
        if (!predicted.find(r.id)) missing.push_back(r.id);
    }
    for (const auto& r : predicted.rows) {
        if (!reference.find(r.id)) missing.push_back(r.id);
    }
    if (!missing.empty()) {
        if (missing.size() > 10) missing.resize(10);
        fail_data("record_metrics: id sets differ (e.g. " + join(missing, ", ") + ")");
    }
    std::vector<TagMetrics> out;
    for (std::size_t t = 0; t < reference.tags.size(); ++t) {
        auto pt = predicted.tag_index(reference.tags[t]);
        if (!pt) fail_data("record_metrics: predicted table lacks tag '" + reference.tags[t] + "'");
        std::vector<std::uint8_t> truth, pred;
        for (const auto& r : reference.rows) {
            truth.push_back(r.values[t]);
            pred.push_back(predicted.find(r.id)->values[*pt]);
        }
        out.push_back({reference.tags[t], evaluate(pred, truth)});
    }
    return out;
}

namespace {

bool parse_year_month(std::string_view s, int& year, int& month) {
    s = trim(s);
    if (s.size() < 7 || (s[4] != '-' && s[4] != '/')) return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    if (s.size() > 7 && s[7] != s[4]) return false;
    year = std::stoi(std::string(s.substr(0, 4)));
    month = std::stoi(std::string(s.substr(5, 2)));
    return month >= 1 && month <= 12;
}

}  // namespace

std::vector<PrevalenceSeries> prevalence_series(const TagTable& table, std::string_view date_column) {
    auto col = table.column(date_column);
    if (!col) fail_data("tag table has no '" + std::string(date_column) + "' column");
    struct Acc {
        std::size_t records = 0;
        std::vector<std::size_t> tagged;
        bool december = false;
    };
    std::map<int, Acc> years;
    std::size_t excluded = 0;
    for (const auto& r : table.rows) {
        int y = 0, m = 0;
        if (!parse_year_month(r.meta[*col], y, m)) {
            ++excluded;
            continue;
        }
        Acc& a = years[y];
        if (a.tagged.empty()) a.tagged.assign(table.tags.size(), 0);
        ++a.records;
        a.december |= m == 12;
        for (std::size_t t = 0; t < table.tags.size(); ++t) a.tagged[t] += r.values[t];
    }
    std::vector<PrevalenceSeries> out;
    for (std::size_t t = 0; t < table.tags.size(); ++t) {
        PrevalenceSeries s;
        s.tag = table.tags[t];
        s.excluded = excluded;
        for (const auto& [y, a] : years) {
            YearPoint p{y, a.records, a.tagged[t], 0.0};
            p.percent = 100.0 * static_cast<double>(p.tagged) / static_cast<double>(p.records);
            s.points.push_back(p);
        }
        s.partial_final_year = !years.empty() && !years.rbegin()->second.december;
        out.push_back(std::move(s));
    }
    return out;
}

std::string prevalence_to_csv(std::span<const PrevalenceSeries> series) {
    std::ostringstream out;
    csv::Writer w(out);
    w.write({"tag", "year", "records", "tagged", "percent", "partial"});
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            bool partial = s.partial_final_year && i + 1 == s.points.size();
            w.write({s.tag, std::to_string(p.year), std::to_string(p.records), std::to_string(p.tagged),
                     format_fixed(p.percent, 2), partial ? "1" : "0"});
        }
    }
    return std::move(out).str();
}

}  // namespace craml
