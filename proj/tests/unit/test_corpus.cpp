#include <gtest/gtest.h>

#include "craml/corpus.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <random>

using namespace craml;
using craml::testing::TempDir;
using craml::testing::write_text;

TEST(Clean, DefaultProfileExample) {
    EXPECT_EQ(clean("You SHALL not Hire.", CleaningProfile::defaults()), "you shall not hire .");
}

TEST(Clean, EmptyInput) { EXPECT_EQ(clean("", CleaningProfile::defaults()), ""); }

TEST(Clean, PipeIsStripped) {
    EXPECT_EQ(clean("a|b || c", CleaningProfile::defaults()), "a b c");
}

TEST(Clean, StopsBecomeTokens) {
    EXPECT_EQ(clean("one;two?three!four.", CleaningProfile::defaults()), "one ; two ? three ! four .");
}

TEST(Clean, ReplacementsMatchWholeWords) {
    CleaningProfile p = CleaningProfile::parse(R"({"replacements": [["e.g.", "for example"], ["co", "company"]]})");
    EXPECT_EQ(clean("E.g. the Co and coffee", p), "for example the company and coffee");
}

TEST(Clean, InvalidUtf8IsReplacedAndCounted) {
    CleanReport report;
    std::string out = clean(std::string("ok \xff\xfe end"), CleaningProfile::defaults(), &report);
    EXPECT_EQ(report.invalid_bytes, 2u);
    EXPECT_EQ(tokenize(out).front(), "ok");
    EXPECT_EQ(tokenize(out).back(), "end");
}

TEST(Clean, MatchesCharacterLevelReference) {
    std::mt19937 gen(11);
    const std::string alphabet = "abcXYZ019 .,;:!?'\"-()|\t\n";
    for (int c = 0; c < 2000; ++c) {
        std::string raw;
        std::size_t len = gen() % 60;
        for (std::size_t i = 0; i < len; ++i) raw += alphabet[gen() % alphabet.size()];
        ASSERT_EQ(clean(raw, CleaningProfile::defaults()), craml::testing::reference_clean(raw)) << raw;
    }
}

TEST(Clean, IsIdempotent) {
    std::mt19937 gen(12);
    const std::string alphabet = "abcdefg HIJ.,;!?-'\"\xc3\xa9";
    CleaningProfile p = CleaningProfile::parse(R"({"replacements": [["a b", "ab"], ["x.y", "z"]]})");
    for (int c = 0; c < 2000; ++c) {
        std::string raw;
        std::size_t len = gen() % 40;
        for (std::size_t i = 0; i < len; ++i) raw += alphabet[gen() % alphabet.size()];
        std::string once = clean(raw, p);
        ASSERT_EQ(clean(once, p), once) << raw;
    }
}

TEST(Clean, ProfileVersionTracksSettings) {
    auto a = CleaningProfile::defaults();
    auto b = CleaningProfile::parse(R"({"lowercase": false})");
    EXPECT_NE(a.version(), b.version());
    EXPECT_EQ(a.version(), CleaningProfile::defaults().version());
}

TEST(Clean, ReplacementThatReintroducesItsSourceIsRejected) {
    EXPECT_THROW(CleaningProfile::parse(R"({"replacements": [["co", "co op"]]})"), Error);
}

class IngestTest : public ::testing::Test {
protected:
    TempDir dir;
    void SetUp() override {
        write_text(dir / "docs/a.txt", "Alpha.");
        write_text(dir / "docs/b.txt", "Beta.");
        write_text(dir / "docs/sub/c.txt", "Gamma.");
        write_text(dir / "docs/notes.md", "ignored");
    }
};

TEST_F(IngestTest, ExactCoverHasNoOrphans) {
    write_text(dir / "meta.csv", "doc_id,record_id\na,r1\nb,r1\nsub/c,r2\n");
    CorpusManifest m = ingest(dir / "docs", dir / "meta.csv");
    ASSERT_EQ(m.entries.size(), 3u);
    EXPECT_EQ(m.entries[0].doc_id, "a");
    EXPECT_EQ(m.entries[2].doc_id, "sub/c");
    EXPECT_EQ(m.entries[2].path, "sub/c.txt");
    EXPECT_TRUE(m.orphans.empty());
}

TEST_F(IngestTest, MissingMetadataRowIsReportedNotDropped) {
    write_text(dir / "meta.csv", "doc_id,record_id\na,r1\nb,r1\n");
    CorpusManifest m = ingest(dir / "docs", dir / "meta.csv");
    EXPECT_EQ(m.entries.size(), 3u);
    EXPECT_EQ(m.orphans, std::vector<std::string>{"sub/c"});
}

TEST_F(IngestTest, TabDelimitedMetadata) {
    write_text(dir / "meta.tsv", "doc_id\trecord_id\na\tr1\nb\tr1\nsub/c\tr2\n");
    CorpusManifest m = ingest(dir / "docs", dir / "meta.tsv");
    EXPECT_TRUE(m.orphans.empty());
    MetadataTable t = MetadataTable::load(dir / "meta.tsv");
    EXPECT_EQ(t.value("sub/c", "record_id"), "r2");
}

TEST_F(IngestTest, SameStemDifferentExtensionGetsHashSuffix) {
    write_text(dir / "docs/a.TXT2", "Other alpha.");
    IngestOptions opts;
    opts.extension = "";
    CorpusManifest m = ingest(dir / "docs", std::nullopt, opts);
    std::size_t with_suffix = 0;
    for (const auto& e : m.entries) with_suffix += e.doc_id.rfind("a#", 0) == 0;
    EXPECT_EQ(with_suffix, 2u);
}

TEST_F(IngestTest, IdenticalCollidingFilesAreAHardError) {
    write_text(dir / "docs/b.md", "Beta.");
    IngestOptions opts;
    opts.extension = "";
    try {
        ingest(dir / "docs", std::nullopt, opts);
        FAIL() << "expected duplicate doc_id error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("b.md"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("b.txt"), std::string::npos);
    }
}

TEST_F(IngestTest, ManifestIsDeterministicAndRoundTrips) {
    write_text(dir / "meta.csv", "doc_id,record_id\na,r1\n");
    CorpusManifest m = ingest(dir / "docs", dir / "meta.csv");
    m.write(dir / "out1");
    ingest(dir / "docs", dir / "meta.csv").write(dir / "out2");
    EXPECT_EQ(read_file(dir / "out1/manifest.csv"), read_file(dir / "out2/manifest.csv"));
    CorpusManifest back = CorpusManifest::load(dir / "out1/manifest.csv");
    EXPECT_EQ(back.entries.size(), 3u);
    EXPECT_EQ(back.orphans, m.orphans);
}

TEST_F(IngestTest, UnreadableFileIsAPerFileError) {
    CorpusManifest m = ingest(dir / "docs", std::nullopt);
    std::filesystem::remove(dir / "docs/b.txt");
    std::vector<std::string> errors;
    std::vector<std::string> ids;
    std::mutex mu;
    for_each_document(
        m, CleaningProfile::defaults(), 2,
        [&](std::size_t, Document&& d) {
            std::lock_guard<std::mutex> g(mu);
            ids.push_back(d.doc_id);
        },
        [&](const ManifestEntry& e, const std::string&) {
            std::lock_guard<std::mutex> g(mu);
            errors.push_back(e.doc_id);
        });
    EXPECT_EQ(errors, std::vector<std::string>{"b"});
    EXPECT_EQ(ids.size(), 2u);
}

TEST(Metadata, DuplicateDocIdIsRejected) {
    EXPECT_THROW(MetadataTable::parse("doc_id,x\na,1\na,2\n"), Error);
}

TEST(Metadata, MissingKeyColumnIsRejected) { EXPECT_THROW(MetadataTable::parse("name,x\na,1\n"), Error); }
