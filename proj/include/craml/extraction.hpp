#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/corpus.hpp"
#include "craml/util.hpp"

namespace craml {

enum class WindowUnit { words, sentences };

WindowUnit parse_window_unit(std::string_view text);
std::string_view to_string(WindowUnit unit);

struct TagKeywords {
    std::string tag;
    std::vector<std::string> keywords;
};

/// Tag -> keyword list, as in a `keywords.json` file:
///   { "nopoach": ["hire", "recruit", "employ", "solicit"] }
/// Keywords are lowercased on load and matched as raw substrings, so
/// spaces inside a keyword are significant.
class KeywordConfig {
public:
    KeywordConfig() = default;
    explicit KeywordConfig(std::vector<TagKeywords> tags);

    static KeywordConfig load(const std::filesystem::path& path);
    static KeywordConfig parse(std::string_view json_text);
    std::string to_json() const;

    const std::vector<TagKeywords>& tags() const { return tags_; }
    bool has_tag(std::string_view tag) const;
    const std::vector<std::string>& keywords_for(std::string_view tag) const;
    std::vector<std::string> all_keywords() const;

    /// Stable fingerprint of tags + keywords, used to bind extracts to models.
    std::string hash() const;

private:
    std::vector<TagKeywords> tags_;  // sorted by tag name
};

struct WindowConfig {
    std::size_t n = 6;
    WindowUnit unit = WindowUnit::words;
};

struct Chunk {
    std::string doc_id;
    std::string text;
    std::string keyword;
    std::size_t keyword_index = 0;  // token offset of the keyword within text
};

bool contains_keyword(std::string_view text, std::span<const std::string> keywords);

/// Window of up to n tokens either side of `hit`. The sentence must not
/// contain stop tokens.
Chunk get_context(std::span<const std::string> sentence, std::size_t hit, std::size_t n);

/// Token index of the earliest keyword occurrence in a chunk, if any.
std::optional<std::size_t> locate_keyword(std::string_view chunk, std::span<const std::string> keywords);

/// All deduplicated chunks (first-occurrence order) for one cleaned text.
std::vector<Chunk> extract_chunks(std::string_view clean_text, std::span<const std::string> keywords,
                                  const WindowConfig& window, const CleaningProfile& profile,
                                  std::string_view doc_id = {});

// ---- extract files --------------------------------------------------------

struct ExtractRow {
    std::string doc_id;
    std::vector<std::string> metadata;
    std::vector<std::string> chunks;
};

struct ExtractOptions {
    WindowConfig window;
    std::size_t rows_per_file = 50000;
    std::size_t jobs = 1;
    double sample = 1.0;         // document sampling fraction, 1 keeps all
    std::uint64_t sample_seed = 0;
};

struct ExtractResult {
    std::vector<std::filesystem::path> files;
    std::size_t documents = 0;
    std::size_t documents_with_hits = 0;
    std::size_t rows_written = 0;
    std::size_t chunks_written = 0;
    std::vector<IngestError> errors;
};

/// Writes `<out_dir>/keywords.json` plus one extract per tag under
/// `<out_dir>/<tag>/part-NNNNN.csv`. Rows appear in doc_id order regardless
/// of worker count.
ExtractResult extract_corpus(const CorpusManifest& manifest, const MetadataTable* metadata,
                             const KeywordConfig& config, const CleaningProfile& profile,
                             const std::filesystem::path& out_dir, const ExtractOptions& options);

struct ExtractFile {
    std::filesystem::path path;
    Provenance provenance;
    std::vector<std::string> metadata_columns;
    std::vector<ExtractRow> rows;
    std::size_t malformed = 0;
};

ExtractFile read_extract_file(const std::filesystem::path& path);

/// Extract part files below `dir` (recursive, sorted).
std::vector<std::filesystem::path> list_extract_files(const std::filesystem::path& dir);

/// Streams rows of many files in order.
void for_each_extract_row(std::span<const std::filesystem::path> files,
                          const std::function<void(const ExtractFile&, const ExtractRow&)>& fn);

/// Per-row Bernoulli(fraction) decision, a pure function of (seed, doc_id)
/// so every tag's extract keeps the same documents.
bool keep_row(std::string_view doc_id, double fraction, std::uint64_t seed);

/// Writes the sampled subset of each file to `out_dir`, preserving file
/// names. Returns the written paths.
std::vector<std::filesystem::path> sample_extract(std::span<const std::filesystem::path> files, double fraction,
                                                  std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace craml
