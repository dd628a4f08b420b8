#include <gtest/gtest.h>

#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/extrapolation.hpp"
#include "craml/rules.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace craml;
using craml::testing::TempDir;
using craml::testing::write_text;

namespace {

std::vector<craml::testing::RefRule> to_ref(const RuleSet& rs) {
    std::vector<const Rule*> ordered;
    for (const auto& r : rs.rules()) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const Rule* a, const Rule* b) { return a->order < b->order; });
    std::vector<craml::testing::RefRule> out;
    for (const Rule* r : ordered) {
        craml::testing::RefRule ref{r->pattern, r->prio, {}};
        for (const auto& v : r->values) ref.values.push_back(v ? std::optional<int>(*v) : std::nullopt);
        out.push_back(ref);
    }
    return out;
}

const char* kRules =
    "rule,prio,nopoach\n"
    "hire,0,0\n"
    "shall not hire,1,1\n"
    "may not hire an applicant,2,0\n"
    "not hire offer to hire,3,1\n";

}  // namespace

TEST(Extrapolation, DedupKeyIsPriorityWeightedLength) {
    auto rs = RuleSet::parse(kRules);
    EXPECT_EQ(dedup_key(rs.rules()[0]), 1u);
    EXPECT_EQ(dedup_key(rs.rules()[1]), 10003u);
    EXPECT_EQ(dedup_key(rs.rules()[3]), 30005u);
}

TEST(Extrapolation, HighestPriorityRuleLabelsEachChunkOnce) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows{
        {"d1", {"you shall not hire staff", "we hire people", "unrelated words"}},
        {"d2", {"you shall not hire staff", "we may not hire an applicant today"}},
    };
    auto set = extrapolate_rows(rows, rs, {});
    ASSERT_EQ(set.rows.size(), 3u);
    EXPECT_EQ(set.rows[0].chunk, "we may not hire an applicant today");
    EXPECT_EQ(set.rows[0].values[0], 0);
    EXPECT_EQ(set.rows[1].chunk, "you shall not hire staff");
    EXPECT_EQ(set.rows[1].doc_id, "d1");
    EXPECT_EQ(set.rows[1].rule, "shall not hire");
    EXPECT_EQ(set.rows[1].pw_length, 10003u);
    EXPECT_EQ(set.rows[2].rule, "hire");
}

TEST(Extrapolation, MatchesBruteForceReference) {
    std::mt19937 gen(21);
    const std::vector<std::string> vocab{"not", "hire", "shall", "any", "employee", "may", "solicit", "x"};
    auto phrase = [&](int max_len) {
        std::string s;
        for (int w = 0, len = 1 + gen() % max_len; w < len; ++w) s += (w ? " " : "") + vocab[gen() % vocab.size()];
        return s;
    };
    for (int c = 0; c < 200; ++c) {
        std::string text = "rule,prio,a,b\nhire,0,0,0\n";
        std::set<std::pair<std::string, int>> seen{{"hire", 0}};
        for (int r = 0, k = gen() % 8; r < k; ++r) {
            std::string pat = phrase(3);
            int prio = gen() % 4;
            if (!seen.insert({pat, prio}).second) continue;
            std::string b = gen() % 3 == 0 ? "" : std::to_string(gen() % 2);
            text += pat + "," + std::to_string(prio) + "," + std::to_string(gen() % 2) + "," + b + "\n";
        }
        auto rs = RuleSet::parse(text);
        std::vector<ChunkRow> rows;
        std::vector<std::pair<std::string, std::vector<std::string>>> ref_rows;
        for (int d = 0, nd = 1 + gen() % 6; d < nd; ++d) {
            ChunkRow row{"doc" + std::to_string(d), {}};
            for (int k = 0, nk = 1 + gen() % 5; k < nk; ++k) row.chunks.push_back(phrase(7));
            std::sort(row.chunks.begin(), row.chunks.end());
            row.chunks.erase(std::unique(row.chunks.begin(), row.chunks.end()), row.chunks.end());
            ref_rows.emplace_back(row.doc_id, row.chunks);
            rows.push_back(row);
        }
        ExtrapolateOptions opts;
        opts.seed = gen();
        auto set = extrapolate_rows(rows, rs, opts);
        auto want = craml::testing::reference_training(ref_rows, to_ref(rs));
        ASSERT_EQ(set.rows.size(), want.size()) << text;
        for (const auto& r : set.rows) {
            auto it = want.find(r.chunk);
            ASSERT_NE(it, want.end());
            EXPECT_EQ(r.doc_id, it->second.doc_id);
            EXPECT_EQ(r.pw_length, it->second.pw_length);
            std::vector<int> got(r.values.begin(), r.values.end());
            EXPECT_EQ(got, it->second.values) << text << r.chunk;
        }
        for (std::size_t i = 1; i < set.rows.size(); ++i) EXPECT_GE(set.rows[i - 1].pw_length, set.rows[i].pw_length);
    }
}

TEST(Extrapolation, NegativeSamplingAddsUnmatchedChunksAfterPositives) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows{{"d", {"you shall not hire staff", "plain text one", "plain text two"}}};
    ExtrapolateOptions opts;
    opts.negative_sampling = true;
    opts.negative_ratio = 1.0;
    auto set = extrapolate_rows(rows, rs, opts);
    ASSERT_EQ(set.rows.size(), 2u);
    EXPECT_EQ(set.rows[1].rule, "NEGATIVE");
    EXPECT_EQ(set.rows[1].chunk, "plain text one");
    EXPECT_EQ(set.rows[1].values, std::vector<std::uint8_t>{0});
    EXPECT_TRUE(set.rows[1].negative());

    opts.negative_ratio = 2.0;
    EXPECT_EQ(extrapolate_rows(rows, rs, opts).rows.size(), 3u);
}

TEST(Extrapolation, NegativesNeverPrecedeAPositive) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows{{"d", {"plain text", "you shall not hire staff"}}};
    ExtrapolateOptions opts;
    opts.negative_sampling = true;
    auto set = extrapolate_rows(rows, rs, opts);
    ASSERT_EQ(set.rows.size(), 1u);
    EXPECT_FALSE(set.rows[0].negative());
}

TEST(Extrapolation, SamplingAndAugmentation) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows;
    for (int i = 0; i < 400; ++i) {
        rows.push_back({"doc" + std::to_string(i),
                        {"we hire number " + std::to_string(i), "shall not hire " + std::to_string(i)}});
    }
    ExtrapolateOptions opts;
    opts.rate = 0.25;
    opts.seed = 4;
    auto sampled = extrapolate_rows(rows, rs, opts);
    std::size_t kept_docs = 0;
    for (const auto& r : rows) kept_docs += keep_row(r.doc_id, 0.25, 4);
    EXPECT_EQ(sampled.rows.size(), 2 * kept_docs);

    opts.augment_positives = true;
    auto augmented = extrapolate_rows(rows, rs, opts);
    EXPECT_EQ(augmented.rows.size(), 400 + kept_docs);
    for (const auto& r : augmented.rows) {
        if (!keep_row(r.doc_id, 0.25, 4)) EXPECT_TRUE(r.positive_any());
    }
}

TEST(Extrapolation, RejectsBadOptions) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows;
    ExtrapolateOptions opts;
    opts.rate = 0;
    EXPECT_THROW(extrapolate_rows(rows, rs, opts), Error);
    opts.rate = 1.5;
    EXPECT_THROW(extrapolate_rows(rows, rs, opts), Error);
    opts.rate = 1;
    opts.negative_ratio = 0;
    EXPECT_THROW(extrapolate_rows(rows, rs, opts), Error);
}

TEST(Extrapolation, EmptyResultWarns) {
    auto rs = RuleSet::parse(kRules);
    std::vector<ChunkRow> rows{{"d", {"nothing"}}};
    auto set = extrapolate_rows(rows, rs, {});
    EXPECT_TRUE(set.rows.empty());
    EXPECT_FALSE(set.warnings.empty());
}

TEST(Extrapolation, FilesRoundTripAndAreDeterministic) {
    TempDir dir;
    std::string body = "# craml 0 artifact=extract\n# keywords_hash=abc\n# tag=nopoach\nid,text\n";
    for (int i = 0; i < 50; ++i) {
        body += "d" + std::to_string(i) + ",we hire " + std::to_string(i) + "|you shall not hire " +
                std::to_string(i % 7) + "|other\n";
    }
    write_text(dir / "x/part-00000.csv", body);
    auto rs = RuleSet::parse(kRules, "rules.csv");
    auto files = list_extract_files(dir / "x");
    ExtrapolateOptions opts;
    opts.negative_sampling = true;
    opts.seed = 17;
    auto a = extrapolate(files, rs, opts);
    auto b = extrapolate(files, rs, opts);
    EXPECT_EQ(training_to_csv(a), training_to_csv(b));
    EXPECT_EQ(a.keywords_hash, "abc");
    EXPECT_EQ(a.extract_tag, "nopoach");
    write_training(a, dir / "training.csv");
    auto back = read_training(dir / "training.csv");
    EXPECT_EQ(back.tags, a.tags);
    EXPECT_EQ(back.seed, 17u);
    EXPECT_TRUE(back.negative_sampling);
    ASSERT_EQ(back.rows.size(), a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].chunk, a.rows[i].chunk);
        EXPECT_EQ(back.rows[i].values, a.rows[i].values);
    }
}
