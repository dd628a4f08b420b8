#include <gtest/gtest.h>

#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/ngram.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <map>
#include <random>

using namespace craml;
using craml::testing::TempDir;
using craml::testing::write_text;

namespace {

std::vector<std::string> toks(const std::string& s) { return tokenize(s); }

}  // namespace

TEST(CenteredSlice, MidpointUsesFloorDivision) {
    auto t = toks("a b c d e f g h i");
    EXPECT_EQ(centered_slice(t, 2, Centering::midpoint, std::nullopt), "c d e f");
    EXPECT_EQ(centered_slice(t, 10, Centering::midpoint, std::nullopt), "a b c d e f g h i");
    auto even = toks("a b c d");
    EXPECT_EQ(centered_slice(even, 1, Centering::midpoint, std::nullopt), "b c");
}

TEST(CenteredSlice, KeywordCentering) {
    auto t = toks("a b c d e f g");
    EXPECT_EQ(centered_slice(t, 1, Centering::keyword, 0), "a b");
    EXPECT_EQ(centered_slice(t, 2, Centering::keyword, 4), "c d e f g");
    EXPECT_EQ(centered_slice(t, 2, Centering::keyword, std::nullopt), "b c d e");
}

TEST(CenteredSlice, MatchesSliceDefinition) {
    std::mt19937 gen(3);
    for (int c = 0; c < 500; ++c) {
        std::vector<std::string> t;
        for (std::size_t i = 0, len = gen() % 20; i < len; ++i) t.push_back("w" + std::to_string(i));
        std::size_t n = gen() % 6;
        long mid = static_cast<long>(t.size()) / 2;
        long lo = std::max(0L, mid - static_cast<long>(n));
        long hi = std::min(static_cast<long>(t.size()), mid + static_cast<long>(n));
        std::string want;
        for (long i = lo; i < hi; ++i) want += (i > lo ? " " : "") + t[i];
        ASSERT_EQ(centered_slice(t, n, Centering::midpoint, std::nullopt), want);
    }
}

TEST(Centering, ParsesNames) {
    EXPECT_EQ(parse_centering("keyword"), Centering::keyword);
    EXPECT_EQ(parse_centering("midpoint"), Centering::midpoint);
    EXPECT_THROW(parse_centering("middle"), Error);
}

class NgramExploreTest : public ::testing::Test {
protected:
    TempDir dir;
    std::vector<std::filesystem::path> files;

    void SetUp() override {
        write_text(dir / "x/part-00000.csv",
                   "# craml 0 artifact=extract\n"
                   "id,text\n"
                   "a,shall not hire any|we may hire staff\n"
                   "b,shall not hire any|you must not recruit\n"
                   "c,shall not hire any\n");
        write_text(dir / "x/part-00001.csv",
                   "# craml 0 artifact=extract\n"
                   "id,text\n"
                   "d,we may hire staff\n");
        files = list_extract_files(dir / "x");
    }
};

TEST_F(NgramExploreTest, CountsAreSortedAndComplete) {
    std::vector<std::string> kws{"hire"};
    auto report = ngram_explore(files, 1, Centering::keyword, kws);
    EXPECT_EQ(report.windows, 6u);
    EXPECT_EQ(report.keyword_fallbacks, 1u);
    ASSERT_GE(report.rows.size(), 2u);
    EXPECT_EQ(report.rows[0].ngram, "not hire any");
    EXPECT_EQ(report.rows[0].count, 3u);
    EXPECT_EQ(report.rows[1].ngram, "may hire staff");
    EXPECT_EQ(report.rows[1].count, 2u);
    std::size_t total = 0;
    for (const auto& r : report.rows) total += r.count;
    EXPECT_EQ(total, report.windows);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        EXPECT_TRUE(a.count > b.count || (a.count == b.count && a.ngram < b.ngram));
    }
}

TEST_F(NgramExploreTest, ParallelMatchesSerial) {
    std::vector<std::string> kws{"hire", "recruit"};
    auto a = ngram_explore(files, 2, Centering::midpoint, kws, 1);
    auto b = ngram_explore(files, 2, Centering::midpoint, kws, 4);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].ngram, b.rows[i].ngram);
        EXPECT_EQ(a.rows[i].count, b.rows[i].count);
    }
}

TEST_F(NgramExploreTest, ReportFileCarriesProvenance) {
    std::vector<std::string> kws{"hire"};
    auto report = ngram_explore(files, 1, Centering::keyword, kws);
    write_ngram_report(report, dir / "ngrams.csv", 1, Centering::keyword);
    auto p = Provenance::read_file(dir / "ngrams.csv");
    EXPECT_EQ(p.artifact, "ngrams");
    EXPECT_EQ(p.get("n"), "1");
    EXPECT_EQ(p.get("center"), "keyword");
}
