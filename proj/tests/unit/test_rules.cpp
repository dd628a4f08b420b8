#include <gtest/gtest.h>

#include "craml/csv.hpp"
#include "craml/rules.hpp"
#include "reference.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace craml;

namespace {

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CRAML_FIXTURES) / name; }

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

std::vector<RuleRowError> errors_of(const std::string& text) {
    try {
        RuleSet::parse(text);
    } catch (const RuleSetError& e) {
        return e.errors();
    }
    return {};
}

}  // namespace

TEST(RuleSet, LoadsFormativeFixture) {
    auto rs = RuleSet::load(fixture("nopoach_formative.csv"));
    EXPECT_EQ(rs.tags(), std::vector<std::string>{"nopoach"});
    ASSERT_EQ(rs.rules().size(), 9u);
    for (std::size_t i = 1; i < rs.rules().size(); ++i) EXPECT_LE(rs.rules()[i - 1].prio, rs.rules()[i].prio);
    EXPECT_EQ(rs.rules().front().pattern, "hire");
    EXPECT_EQ(rs.rules().back().prio, 3);
}

TEST(RuleSet, FormativeExamples) {
    auto rs = RuleSet::load(fixture("nopoach_formative.csv"));
    auto out = apply_rules("franchisee shall not hire any employee", rs);
    EXPECT_EQ(out.value(0), 1);
    EXPECT_EQ(out.winner->pattern, "shall not hire");
    EXPECT_EQ(apply_rules("we will hire staff", rs).value(0), 0);
    EXPECT_EQ(apply_rules("may not hire an applicant who has a felony record", rs).value(0), 0);
    EXPECT_EQ(apply_rules("will not hire offer to hire or otherwise solicit any employee", rs).value(0), 1);
    EXPECT_FALSE(apply_rules("nothing relevant", rs).matched());
}

TEST(RuleSet, TrainingExcerptRowsAreReproduced) {
    auto rs = RuleSet::load(fixture("nopoach_testing.csv"));
    auto table = csv::read_table(fixture("nopoach_training_excerpt.csv"));
    ASSERT_EQ(table.rows.size(), 6u);
    std::size_t col_chunk = table.require_column("chunk");
    std::size_t col_rule = table.require_column("rule");
    std::size_t col_val = table.require_column("nopoach");
    for (const auto& row : table.rows) {
        auto out = apply_rules(row[col_chunk], rs);
        ASSERT_TRUE(out.matched()) << row[col_chunk];
        EXPECT_EQ(out.winner->pattern, row[col_rule]);
        EXPECT_EQ(std::to_string(out.value(0)), row[col_val]);
    }
}

TEST(RuleSet, BlankCellsLeaveTagsUntouched) {
    auto rs = RuleSet::parse("rule,prio,a,b\nhire,0,0,0\nnot hire,1,1,\nnot hire staff,2,,1\n");
    auto out = apply_rules("do not hire staff", rs);
    EXPECT_EQ(out.value(0), 1);
    EXPECT_EQ(out.value(1), 1);
    auto partial = apply_rules("do not hire", rs);
    EXPECT_EQ(partial.value(0), 1);
    EXPECT_EQ(partial.value(1), 0);
    EXPECT_EQ(partial.values[1], std::optional<std::uint8_t>(0));
}

TEST(RuleSet, EqualPriorityLaterRowWins) {
    auto rs = RuleSet::parse("rule,prio,t\nhire,0,0\nnot hire,1,1\nhire any,1,0\n");
    EXPECT_EQ(apply_rules("not hire any", rs).value(0), 0);
    EXPECT_EQ(apply_rules("not hire any", rs).winner->pattern, "hire any");
}

TEST(RuleSet, RegexRules) {
    auto rs = RuleSet::parse("rule,prio,t\nhire,0,0\nREGEX:::not (hire|recruit),1,1\n");
    EXPECT_EQ(apply_rules("will not recruit", rs).value(0), 1);
    EXPECT_EQ(rs.rules()[1].display(), "REGEX:::not (hire|recruit)");
    EXPECT_FALSE(errors_of("rule,prio,t\nhire,0,0\nREGEX:::(a)\\1,1,1\n").empty());
    EXPECT_FALSE(errors_of("rule,prio,t\nhire,0,0\nREGEX:::([a,1,1\n").empty());
}

TEST(RuleSet, ErrorsCarryLineNumbers) {
    auto errs = errors_of("rule,prio,t\nhire,0,0\nbad,x,1\nother,1,2\nhire,0,1\n,1,1\nnothing,1,\n");
    ASSERT_EQ(errs.size(), 5u);
    EXPECT_EQ(errs[0].line, 3u);
    EXPECT_EQ(errs[1].line, 4u);
    EXPECT_EQ(errs[2].line, 5u);
    EXPECT_EQ(errs[3].line, 6u);
    EXPECT_EQ(errs[4].line, 7u);
}

TEST(RuleSet, StructuralErrors) {
    EXPECT_FALSE(errors_of("rule,prio\nhire,0\n").empty());
    EXPECT_FALSE(errors_of("pattern,prio,t\nhire,0,0\n").empty());
    EXPECT_FALSE(errors_of("rule,prio,t\n").empty());
    EXPECT_FALSE(errors_of("rule,prio,t\nnot hire,1,1\n").empty());
    EXPECT_FALSE(errors_of("rule,prio,t,t\nhire,0,0,0\n").empty());
    EXPECT_FALSE(errors_of("rule,prio,t\nhire,0,0,0\n").empty());
    EXPECT_EQ(RuleSetError("x", {}).kind(), ErrorKind::data);
}

TEST(RuleSet, CanonicalCsvRoundTrips) {
    auto rs = RuleSet::load(fixture("nopoach_testing.csv"));
    auto back = RuleSet::parse(rs.to_csv());
    ASSERT_EQ(back.rules().size(), rs.rules().size());
    for (std::size_t i = 0; i < rs.rules().size(); ++i) {
        EXPECT_EQ(back.rules()[i].display(), rs.rules()[i].display());
        EXPECT_EQ(back.rules()[i].values, rs.rules()[i].values);
    }
}

TEST(RuleSet, ApplyMatchesBruteForceReference) {
    std::mt19937 gen(5);
    const std::vector<std::string> vocab{"not", "hire", "shall", "any", "employee", "may", "solicit"};
    for (int c = 0; c < 300; ++c) {
        std::string text = "rule,prio,a,b\nhire,0,0,0\n";
        std::set<std::pair<std::string, int>> seen{{"hire", 0}};
        for (int r = 0, k = 1 + gen() % 8; r < k; ++r) {
            std::string pat;
            for (int w = 0, len = 1 + gen() % 3; w < len; ++w) pat += (w ? " " : "") + vocab[gen() % vocab.size()];
            int prio = gen() % 4;
            if (!seen.insert({pat, prio}).second) continue;
            std::string a = std::vector<std::string>{"", "0", "1"}[gen() % 3];
            std::string b = a.empty() ? std::string("1") : std::vector<std::string>{"", "0", "1"}[gen() % 3];
            text += pat + "," + std::to_string(prio) + "," + a + "," + b + "\n";
        }
        auto rs = RuleSet::parse(text);
        auto ref = to_ref(rs);
        for (int k = 0; k < 20; ++k) {
            std::string chunk;
            for (int w = 0, len = gen() % 9; w < len; ++w) chunk += (w ? " " : "") + vocab[gen() % vocab.size()];
            auto got = apply_rules(chunk, rs);
            auto want = craml::testing::reference_apply(chunk, ref, 2);
            for (std::size_t t = 0; t < 2; ++t) {
                std::optional<int> g = got.values[t] ? std::optional<int>(*got.values[t]) : std::nullopt;
                ASSERT_EQ(g, want[t]) << text << chunk;
            }
        }
    }
}

TEST(RuleCoverage, CountsMatchesWinsAndUnmatched) {
    auto rs = RuleSet::load(fixture("nopoach_formative.csv"));
    std::vector<std::string> chunks{"shall not hire x", "we hire", "nothing", "may not hire"};
    auto cov = rule_coverage(rs, chunks);
    EXPECT_EQ(cov.chunks, 4u);
    EXPECT_EQ(cov.unmatched, 1u);
    EXPECT_EQ(cov.matches[0], 3u);
    EXPECT_EQ(cov.wins[0], 1u);
}
