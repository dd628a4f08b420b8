#include "craml/validation.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

namespace craml {

ValidationSample make_validation_sample(const TrainingSet& training, std::size_t per_rule_n, double positive_boost,
                                        std::uint64_t seed) {
    if (per_rule_n < 1) fail_usage("per-rule sample size must be >= 1");
    if (!(positive_boost > 0.0)) fail_usage("positive boost must be positive");
    std::map<std::string, std::vector<const TrainingRow*>> by_rule;
    for (const auto& r : training.rows) by_rule[r.rule].push_back(&r);

    std::vector<const TrainingRow*> picked;
    for (const auto& [rule, rows] : by_rule) {
        Rng rng(derive_seed(seed, fnv1a64(rule)));
        // Efraimidis-Spirakis: the k largest u^(1/w) form a weighted sample
        // without replacement.
        std::vector<std::pair<double, const TrainingRow*>> keyed;
        keyed.reserve(rows.size());
        for (const auto* r : rows) {
            double w = r->positive_any() ? positive_boost : 1.0;
            double u = rng.uniform();
            if (u <= 0) u = 0x1.0p-60;
            keyed.emplace_back(std::log(u) / w, r);
        }
        std::size_t k = std::min(per_rule_n, keyed.size());
        std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; i < k; ++i) picked.push_back(keyed[i].second);
    }
    Rng order(seed);
    order.shuffle(picked);

    ValidationSample s;
    s.tags = training.tags;
    char id[32];
    for (std::size_t i = 0; i < picked.size(); ++i) {
        std::snprintf(id, sizeof id, "s%05zu", i + 1);
        const TrainingRow& r = *picked[i];
        s.coder_rows.push_back({id, r.chunk});
        s.key_rows.push_back({id, r.doc_id, r.rule, r.chunk, r.values});
    }
    return s;
}

std::string coder_file_csv(const ValidationSample& sample) {
    std::ostringstream out;
    csv::Writer w(out);
    csv::Row header{"sample_id", "chunk"};
    header.insert(header.end(), sample.tags.begin(), sample.tags.end());
    w.write(header);
    for (const auto& r : sample.coder_rows) {
        csv::Row row{r.sample_id, r.chunk};
        row.resize(header.size());
        w.write(row);
    }
    return std::move(out).str();
}

std::string answer_key_csv(const ValidationSample& sample) {
    std::ostringstream out;
    csv::Writer w(out);
    csv::Row header{"sample_id", "id", "rule", "chunk"};
    header.insert(header.end(), sample.tags.begin(), sample.tags.end());
    w.write(header);
    for (const auto& r : sample.key_rows) {
        csv::Row row{r.sample_id, r.doc_id, r.rule, r.chunk};
        for (auto v : r.values) row.push_back(v ? "1" : "0");
        w.write(row);
    }
    return std::move(out).str();
}

void write_validation_sample(const ValidationSample& sample, const std::filesystem::path& coder_path,
                             const std::filesystem::path& key_path) {
    write_file(coder_path, coder_file_csv(sample));
    write_file(key_path, answer_key_csv(sample));
}

namespace {

std::uint8_t parse_bit(std::string_view cell, std::string_view what, std::string_view id) {
    cell = trim(cell);
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    if (cell.empty()) fail_data(std::string(what) + ": sample " + std::string(id) + " is not coded");
    fail_data(std::string(what) + ": sample " + std::string(id) + " has value '" + std::string(cell) +
              "', expected 0 or 1");
}

}  // namespace

CodedFile parse_coded_file(std::string_view csv_text) {
    csv::Table t = csv::parse_table(csv_text, {.delimiter = ','});
    auto id = t.column("sample_id");
    if (!id) fail_data("coded file: missing sample_id column");
    CodedFile f;
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (i == *id || t.header[i] == "chunk") continue;
        f.tags.push_back(t.header[i]);
        cols.push_back(i);
    }
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) fail_data("coded file: malformed row");
        CodedRow r{row[*id], {}};
        for (auto c : cols) r.values.push_back(parse_bit(row[c], "coded file", r.sample_id));
        f.rows.push_back(std::move(r));
    }
    return f;
}

ValidationSample parse_answer_key(std::string_view csv_text) {
    csv::Table t = csv::parse_table(csv_text, {.delimiter = ','});
    if (t.header.size() < 5 || t.header[0] != "sample_id" || t.header[1] != "id" || t.header[2] != "rule" ||
        t.header[3] != "chunk") {
        fail_data("answer key: header must be sample_id,id,rule,chunk,<tags...>");
    }
    ValidationSample s;
    s.tags.assign(t.header.begin() + 4, t.header.end());
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) fail_data("answer key: malformed row");
        AnswerKeyRow r{row[0], row[1], row[2], row[3], {}};
        for (std::size_t i = 4; i < row.size(); ++i) r.values.push_back(parse_bit(row[i], "answer key", r.sample_id));
        s.coder_rows.push_back({r.sample_id, r.chunk});
        s.key_rows.push_back(std::move(r));
    }
    return s;
}

double cohen_kappa(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, bool* degenerate) {
    if (a.size() != b.size()) fail_data("kappa: rating vectors differ in length");
    if (degenerate) *degenerate = false;
    if (a.empty()) return 0.0;
    const double n = static_cast<double>(a.size());
    double agree = 0;
    double a1 = 0;
    double b1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += (a[i] == b[i]) ? 1 : 0;
        a1 += a[i];
        b1 += b[i];
    }
    double po = agree / n;
    double pe = (a1 / n) * (b1 / n) + (1 - a1 / n) * (1 - b1 / n);
    if (std::abs(1.0 - pe) < 1e-12) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    return (po - pe) / (1.0 - pe);
}

AgreementReport score_validation(const CodedFile& coded, const ValidationSample& key) {
    std::unordered_map<std::string, const CodedRow*> by_id;
    for (const auto& r : coded.rows) {
        if (!by_id.emplace(r.sample_id, &r).second) fail_data("coded file: duplicate sample_id " + r.sample_id);
    }
    std::set<std::string> key_ids;
    std::vector<std::string> missing;
    for (const auto& k : key.key_rows) {
        key_ids.insert(k.sample_id);
        if (!by_id.count(k.sample_id)) missing.push_back(k.sample_id);
    }
    std::vector<std::string> unknown;
    for (const auto& r : coded.rows) {
        if (!key_ids.count(r.sample_id)) unknown.push_back(r.sample_id);
    }
    if (!missing.empty() || !unknown.empty()) {
        std::string msg = "sample ids do not align;";
        if (!missing.empty()) msg += " missing from coded file: " + join(missing, ", ") + ";";
        if (!unknown.empty()) msg += " not in answer key: " + join(unknown, ", ") + ";";
        fail_data(msg);
    }
    std::vector<std::size_t> coded_col;
    for (const auto& tag : key.tags) {
        auto it = std::find(coded.tags.begin(), coded.tags.end(), tag);
        if (it == coded.tags.end()) fail_data("coded file: missing tag column '" + tag + "'");
        coded_col.push_back(static_cast<std::size_t>(it - coded.tags.begin()));
    }

    AgreementReport report;
    report.rows = key.key_rows.size();
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_rule;  // agreed, total
    std::size_t all_agree = 0;
    std::vector<std::vector<std::uint8_t>> expected(key.tags.size()), given(key.tags.size());
    for (const auto& k : key.key_rows) {
        const CodedRow& c = *by_id.at(k.sample_id);
        bool row_ok = true;
        for (std::size_t t = 0; t < key.tags.size(); ++t) {
            std::uint8_t e = k.values[t];
            std::uint8_t g = c.values[coded_col[t]];
            expected[t].push_back(e);
            given[t].push_back(g);
            if (e != g) {
                row_ok = false;
                report.disagreements.push_back({k.sample_id, k.rule, k.chunk, key.tags[t], e, g});
            }
        }
        auto& pr = per_rule[k.rule];
        ++pr.second;
        if (row_ok) {
            ++all_agree;
            ++pr.first;
        }
    }
    for (std::size_t t = 0; t < key.tags.size(); ++t) {
        TagAgreement ta;
        ta.tag = key.tags[t];
        ta.rows = expected[t].size();
        for (std::size_t i = 0; i < ta.rows; ++i) ta.agreed += expected[t][i] == given[t][i];
        ta.agreement = ta.rows ? static_cast<double>(ta.agreed) / static_cast<double>(ta.rows) : 0.0;
        ta.kappa = cohen_kappa(expected[t], given[t], &ta.kappa_degenerate);
        report.tags.push_back(ta);
    }
    report.chunk_agreement = report.rows ? static_cast<double>(all_agree) / static_cast<double>(report.rows) : 0.0;
    double sum = 0;
    for (const auto& [rule, pr] : per_rule) sum += static_cast<double>(pr.first) / static_cast<double>(pr.second);
    report.rule_agreement = per_rule.empty() ? 0.0 : sum / static_cast<double>(per_rule.size());
    return report;
}

std::string AgreementReport::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = rows;
    j["chunk_agreement"] = chunk_agreement;
    j["rule_agreement"] = rule_agreement;
    j["tags"] = nlohmann::ordered_json::array();
    for (const auto& t : tags) {
        j["tags"].push_back({{"tag", t.tag},
                             {"rows", t.rows},
                             {"agreed", t.agreed},
                             {"agreement", t.agreement},
                             {"percent", std::round(t.agreement * 1000.0) / 10.0},
                             {"kappa", t.kappa},
                             {"kappa_degenerate", t.kappa_degenerate}});
    }
    j["disagreements"] = nlohmann::ordered_json::array();
    for (const auto& d : disagreements) {
        j["disagreements"].push_back({{"sample_id", d.sample_id},
                                      {"rule", d.rule},
                                      {"chunk", d.chunk},
                                      {"tag", d.tag},
                                      {"expected", d.expected},
                                      {"coded", d.coded}});
    }
    return j.dump(2);
}

}  // namespace craml
