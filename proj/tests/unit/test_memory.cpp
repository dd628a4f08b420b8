#include <gtest/gtest.h>

#include <malloc.h>

#include "craml/corpus.hpp"
#include "craml/extraction.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <atomic>
#include <cstdlib>
#include <new>

namespace {

std::atomic<long long> g_live{0};
std::atomic<long long> g_peak{0};

void note_alloc(void* p) {
    long long now = g_live += static_cast<long long>(malloc_usable_size(p));
    long long peak = g_peak.load();
    while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
    }
}

}  // namespace

void* operator new(std::size_t n) {
    void* p = std::malloc(n ? n : 1);
    if (!p) throw std::bad_alloc();
    note_alloc(p);
    return p;
}

void operator delete(void* p) noexcept {
    if (!p) return;
    g_live -= static_cast<long long>(malloc_usable_size(p));
    std::free(p);
}

void operator delete(void* p, std::size_t) noexcept { operator delete(p); }

using namespace craml;
using craml::testing::TempDir;
using craml::testing::write_text;

namespace {

long long peak_extract_bytes(const std::filesystem::path& root, std::size_t docs) {
    for (std::size_t d = 0; d < docs; ++d) {
        std::string body;
        for (int i = 0; i < 400; ++i) {
            body += "The franchisee shall not hire employee " + std::to_string(d) + "x" + std::to_string(i) + ". Filler. ";
        }
        write_text(root / "docs" / ("d" + std::to_string(d) + ".txt"), body);
    }
    auto manifest = ingest(root / "docs", std::nullopt);
    auto kw = KeywordConfig::parse(R"({"nopoach": ["hire"]})");
    ExtractOptions opts;
    opts.rows_per_file = 10;
    g_peak = g_live.load();
    long long base = g_live.load();
    extract_corpus(manifest, nullptr, kw, CleaningProfile::defaults(), root / "out", opts);
    return g_peak.load() - base;
}

}  // namespace

TEST(Memory, ExtractionPeakDoesNotGrowWithCorpusSize) {
    TempDir small, large;
    long long a = peak_extract_bytes(small.path(), 20);
    long long b = peak_extract_bytes(large.path(), 200);
    EXPECT_GT(a, 0);
    // the manifest itself grows, documents must not accumulate
    EXPECT_LT(b, a * 2 + (1 << 16)) << "small=" << a << " large=" << b;
}
