#include "craml/synthetic.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace craml {

namespace {

const std::vector<std::string> kSubjects = {"franchisee", "you", "the franchisee", "licensee", "each franchisee"};
const std::vector<std::string> kModals = {"shall", "will", "may"};
const std::vector<std::string> kOrgs = {"franchisor", "another franchisee", "any other franchisee", "our affiliates",
                                        "any franchised restaurant"};

// no-poach clauses; every keyword occurrence sits inside the phrase a rule keys on
const std::vector<std::string> kPositive = {
    "{s} {m} not hire any employee of {o}",
    "{s} {m} not recruit any employee of {o}",
    "{s} {m} not solicit for employment any person employed by {o}",
    "{s} {m} not employ any person employed by {o}",
    "{s} {m} honor the non solicitation of employees covenant",
};

// keyword-bearing clauses that are not no-poach
const std::vector<std::string> kHardNegative = {
    "{s} {m} not hire any applicant who has a felony conviction",
    "{s} {m} not hire any third party vendor to access the system",
    "{s} {m} hire any employee of {o} who applies",
    "{s} {m} not solicit customers of {o}",
    "{s} {m} not employ any person under the age of eighteen",
    "{s} {m} recruit and train qualified staff for the restaurant",
    "{s} is solely responsible for all employment decisions",
    "{s} {m} hire a general manager who completes our training",
};

const std::vector<std::string> kFiller = {
    "this agreement is governed by the laws of the state of {st}",
    "the initial franchise fee is {n} dollars payable upon signing",
    "{s} must maintain insurance coverage as required by the manual",
    "the term of this agreement is {n} years from the effective date",
    "royalty fees are due every week on the first business day",
    "{s} must operate the restaurant in accordance with the system standards",
    "franchisor may inspect the premises during normal business hours",
    "all advertising must be approved in writing by franchisor",
    "{s} must purchase supplies only from approved suppliers",
    "any dispute will be resolved by arbitration in {st}",
    "the territory is described in the attached schedule",
    "{s} must complete the initial training program before opening",
    "this agreement may be terminated upon written notice of default",
    "{s} must keep complete and accurate books and records",
};

const std::vector<std::string> kStates = {"ohio", "texas", "florida", "minnesota", "georgia", "virginia", "oregon"};

std::string pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

std::string fill(std::string tpl, Rng& rng) {
    auto sub = [&](const std::string& key, const std::string& value) {
        for (auto p = tpl.find(key); p != std::string::npos; p = tpl.find(key)) tpl.replace(p, key.size(), value);
    };
    sub("{s}", pick(rng, kSubjects));
    sub("{m}", pick(rng, kModals));
    sub("{o}", pick(rng, kOrgs));
    sub("{st}", pick(rng, kStates));
    sub("{n}", std::to_string(5 + rng.below(46)));
    return tpl;
}

std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

}  // namespace

std::string synthetic_keywords_json() { return "{\n  \"nopoach\": [\"hire\", \"recruit\", \"employ\", \"solicit\"]\n}\n"; }

std::string synthetic_rules_csv() {
    return "rule,prio,nopoach\n"
           "hire,0,0\n"
           "recruit,0,0\n"
           "employ,0,0\n"
           "solicit,0,0\n"
           "not hire any employee,1,1\n"
           "not recruit any employee,1,1\n"
           "not solicit for employment,1,1\n"
           "not employ any person employed,1,1\n"
           "non solicitation of employees,1,1\n";
}

SyntheticCorpus generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& options) {
    if (options.prevalence.empty()) fail_usage("synthetic: at least one year is required");
    if (options.docs_per_record < 1) fail_usage("synthetic: docs_per_record must be >= 1");
    const std::size_t years = options.prevalence.size();
    const std::size_t records_total = options.documents / options.docs_per_record;
    if (records_total < years) fail_usage("synthetic: too few documents for the number of years");

    SyntheticCorpus out;
    out.corpus_dir = dir / "documents";
    out.metadata = dir / "metadata.csv";
    out.keywords = dir / "keywords.json";
    out.rules = dir / "rules" / "nopoach.csv";
    out.planted = dir / "planted.csv";
    std::filesystem::create_directories(out.corpus_dir);

    Rng rng(options.seed);
    std::ostringstream meta, planted;
    csv::Writer mw(meta);
    csv::Writer pw(planted);
    mw.write({"doc_id", "record_id", "firm_name", "effective_date", "type"});
    pw.write({"record_id", "year", "nopoach"});

    std::size_t doc_no = 0;
    std::size_t rec_no = 0;
    for (std::size_t y = 0; y < years; ++y) {
        const int year = options.first_year + static_cast<int>(y);
        std::size_t n_rec = records_total / years + (y < records_total % years ? 1 : 0);
        auto n_pos = static_cast<std::size_t>(std::llround(options.prevalence[y] * static_cast<double>(n_rec)));
        std::vector<std::uint8_t> positive(n_rec, 0);
        for (std::size_t i = 0; i < n_pos && i < n_rec; ++i) positive[i] = 1;
        rng.shuffle(positive);
        out.years.push_back({year, n_rec, n_pos, 100.0 * static_cast<double>(n_pos) / static_cast<double>(n_rec)});

        const bool partial = options.partial_final_year && y + 1 == years;
        for (std::size_t r = 0; r < n_rec; ++r) {
            char rec_id[32];
            std::snprintf(rec_id, sizeof rec_id, "rec_%05zu", ++rec_no);
            int month = 1 + static_cast<int>(r % (partial ? 11 : 12));
            int day = 1 + static_cast<int>(rng.below(28));
            char date[16];
            std::snprintf(date, sizeof date, "%04d-%02d-%02d", year, month, day);
            std::string firm = "firm " + std::to_string(1 + rng.below(400));
            pw.write({rec_id, std::to_string(year), positive[r] ? "1" : "0"});

            // which documents of a positive record carry the clause
            std::vector<std::uint8_t> carries(options.docs_per_record, 0);
            if (positive[r]) {
                for (auto& c : carries) c = rng.below(2);
                carries[rng.below(carries.size())] = 1;
            }
            for (std::size_t d = 0; d < options.docs_per_record; ++d) {
                char doc_id[32];
                std::snprintf(doc_id, sizeof doc_id, "doc_%05zu", ++doc_no);
                std::vector<std::string> sentences;
                std::size_t n_fill = 6 + rng.below(7);
                for (std::size_t i = 0; i < n_fill; ++i) sentences.push_back(fill(pick(rng, kFiller), rng));
                std::size_t n_neg = rng.below(4);
                for (std::size_t i = 0; i < n_neg; ++i) {
                    auto pos = rng.below(sentences.size() + 1);
                    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos),
                                     fill(pick(rng, kHardNegative), rng));
                }
                if (carries[d]) {
                    auto pos = rng.below(sentences.size() + 1);
                    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos),
                                     fill(pick(rng, kPositive), rng));
                }
                std::string text;
                for (const auto& s : sentences) {
                    text += capitalized(s);
                    text += rng.below(5) == 0 ? "; " : ". ";
                    if (rng.below(6) == 0) text += "\n";
                }
                write_file(out.corpus_dir / (std::string(doc_id) + ".txt"), text);
                mw.write({doc_id, rec_id, firm, date, d == 0 ? "agreement" : "disclosure"});
            }
        }
    }
    out.documents = doc_no;
    out.records = rec_no;
    write_file(out.metadata, meta.str());
    write_file(out.planted, planted.str());
    write_file(out.keywords, synthetic_keywords_json());
    write_file(out.rules, synthetic_rules_csv());
    return out;
}

std::string synthetic_project_config(std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["corpus"] = "documents";
    j["metadata"] = "metadata.csv";
    j["keywords"] = "keywords.json";
    j["rules"] = "rules/nopoach.csv";
    j["project"] = ".";
    j["window"] = 6;
    j["ngrams"] = {{"n", 3}, {"center", "midpoint"}};
    j["extrapolate"] = {{"rate", 1.0}, {"negative_sampling", false}};
    j["validate"] = {{"per_rule", 10}, {"positive_boost", 1.0}};
    j["train"] = {{"families", {"rf"}}, {"grid", "default"}, {"folds", 5}, {"purify", false}};
    j["aggregate"] = {{"level", "record"}};
    j["seeds"] = {{"extract", seed}, {"extrapolate", seed}, {"validate", seed}, {"train", seed}};
    return j.dump(2) + "\n";
}

}  // namespace craml
