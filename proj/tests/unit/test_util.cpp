#include <gtest/gtest.h>

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <set>
#include <sstream>

using namespace craml;

TEST(Util, TokenizeSkipsRunsOfWhitespace) {
    EXPECT_EQ(tokenize("  a \t b\n\nc  "), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Util, SplitKeepsEmptyPieces) {
    EXPECT_EQ(split("a||b|", '|'), (std::vector<std::string>{"a", "", "b", ""}));
}

TEST(Util, FormatFixed) {
    EXPECT_EQ(format_fixed(0.7351, 3), "0.735");
    EXPECT_EQ(format_fixed(1.0, 2), "1.00");
}

TEST(Util, DeriveSeedIsStableAndSpreads) {
    EXPECT_EQ(derive_seed(42, 1), derive_seed(42, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
    EXPECT_EQ(seen.size(), 1000u);
}

TEST(Util, RngBelowIsInRangeAndRoughlyUniform) {
    Rng rng(3);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        auto v = rng.below(10);
        ASSERT_LT(v, 10u);
        ++counts[v];
    }
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Util, RngIsReproducible) {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Util, KeyedUniformDependsOnKeyOnly) {
    EXPECT_DOUBLE_EQ(keyed_uniform(5, "doc_1"), keyed_uniform(5, "doc_1"));
    EXPECT_NE(keyed_uniform(5, "doc_1"), keyed_uniform(5, "doc_2"));
    EXPECT_NE(keyed_uniform(5, "doc_1"), keyed_uniform(6, "doc_1"));
}

TEST(Util, ParallelForCoversEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Util, ParallelForRethrows) {
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 7) fail_data("boom");
                 }),
                 Error);
}

TEST(Util, ProvenanceRoundTrip) {
    Provenance p;
    p.artifact = "training";
    p.add("seed", "42").add("ruleset", "nopoach.csv");
    std::stringstream s;
    p.write(s);
    s << "id,chunk\n";
    Provenance q = Provenance::read(s);
    EXPECT_EQ(q.artifact, "training");
    EXPECT_EQ(q.get("seed"), "42");
    EXPECT_EQ(q.get("ruleset"), "nopoach.csv");
    std::string rest;
    std::getline(s, rest);
    EXPECT_EQ(rest, "id,chunk");
}

TEST(Csv, QuotedFieldsRoundTrip) {
    std::ostringstream out;
    csv::Writer w(out);
    w.write({"a,b", "say \"hi\"", "line\nbreak", "plain"});
    csv::Table t = csv::parse_table("h1,h2,h3,h4\n" + out.str());
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0], (csv::Row{"a,b", "say \"hi\"", "line\nbreak", "plain"}));
}

TEST(Csv, DetectsTabs) {
    EXPECT_EQ(csv::detect_delimiter("doc_id\trecord_id"), '\t');
    EXPECT_EQ(csv::detect_delimiter("doc_id,record_id"), ',');
    EXPECT_EQ(csv::detect_delimiter("doc_id"), ',');
}

TEST(Csv, ReadTableSkipsProvenance) {
    craml::testing::TempDir dir;
    craml::testing::write_text(dir / "t.csv", "# craml 0.1.0 artifact=x\n# k=v\nid,text\n1,hello\n");
    csv::Table t = csv::read_table(dir / "t.csv");
    EXPECT_EQ(t.provenance.artifact, "x");
    EXPECT_EQ(t.header, (csv::Row{"id", "text"}));
    EXPECT_EQ(t.rows.size(), 1u);
}
