#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace craml {

/// Declarative text-cleaning settings. Loaded from JSON:
///
///   { "lowercase": true, "strip_punctuation": true, "stops": ".;?!",
///     "replacements": [["e.g.", "for example"], ...] }
///
/// Replacements match whole words only (the source must not be flanked by
/// letters or digits) and are applied after lowercasing.
struct CleaningProfile {
    bool lowercase = true;
    bool strip_punctuation = true;
    std::string stops = ".;?!";
    std::vector<std::pair<std::string, std::string>> replacements;

    static CleaningProfile defaults() { return {}; }
    static CleaningProfile load(const std::filesystem::path& path);
    static CleaningProfile parse(std::string_view json_text);

    bool is_stop(std::string_view token) const;
    std::string version() const;
};

struct CleanReport {
    std::size_t invalid_bytes = 0;
};

/// Lowercases, applies replacements, isolates sentence stops as their own
/// tokens, strips other punctuation and collapses whitespace. Invalid UTF-8
/// is replaced with U+FFFD. Idempotent for any valid profile.
std::string clean(std::string_view raw, const CleaningProfile& profile,
                  CleanReport* report = nullptr);

struct Document {
    std::string doc_id;
    std::string raw_text;
    std::string clean_text;
};

/// Document metadata keyed by doc_id. The key column may be named `doc_id`
/// or `id`; every other column passes through in file order.
class MetadataTable {
public:
    static MetadataTable load(const std::filesystem::path& path);
    static MetadataTable parse(std::string_view text);

    const std::vector<std::string>& columns() const { return columns_; }
    bool contains(std::string_view doc_id) const;
    /// Column values in `columns()` order, or nullptr for unknown ids.
    const std::vector<std::string>* find(std::string_view doc_id) const;
    std::string value(std::string_view doc_id, std::string_view column) const;

    std::string record_id(std::string_view doc_id) const { return value(doc_id, "record_id"); }
    std::string effective_date(std::string_view doc_id) const { return value(doc_id, "effective_date"); }
    std::string firm_name(std::string_view doc_id) const { return value(doc_id, "firm_name"); }

    std::vector<std::string> doc_ids() const;  // sorted
    std::size_t size() const { return rows_.size(); }

private:
    std::vector<std::string> columns_;
    std::unordered_map<std::string, std::vector<std::string>> rows_;
};

struct ManifestEntry {
    std::string doc_id;
    std::string path;  // relative to the corpus root, '/'-separated
    std::uintmax_t bytes = 0;
};

struct IngestError {
    std::string path;
    std::string message;
};

struct CorpusManifest {
    std::filesystem::path root;
    std::string profile_version;
    std::vector<ManifestEntry> entries;  // sorted by doc_id
    std::vector<std::string> orphans;    // doc_ids with no metadata row
    std::vector<IngestError> errors;

    std::filesystem::path absolute(const ManifestEntry& e) const { return root / e.path; }
    const ManifestEntry* find(std::string_view doc_id) const;

    /// Writes manifest.csv, orphans.csv and errors.csv into `dir`.
    void write(const std::filesystem::path& dir) const;
    static CorpusManifest load(const std::filesystem::path& manifest_csv);
};

struct IngestOptions {
    std::string extension = ".txt";  // empty accepts every regular file
    std::string profile_version = CleaningProfile::defaults().version();
};

/// Enumerates text files under `root` and joins them against the metadata
/// file (which may be empty to skip the join). Duplicate doc_ids are a hard
/// error; unreadable files become per-file error records.
CorpusManifest ingest(const std::filesystem::path& root,
                      const std::optional<std::filesystem::path>& metadata,
                      const IngestOptions& options = {});

std::string make_doc_id(const std::filesystem::path& relative);

/// Streams documents one at a time; at most `jobs` documents are resident
/// per batch. `fn` may be called concurrently for different documents.
/// Unreadable documents are reported through `on_error` and skipped.
void for_each_document(const CorpusManifest& manifest, const CleaningProfile& profile,
                       std::size_t jobs,
                       const std::function<void(std::size_t index, Document&&)>& fn,
                       const std::function<void(const ManifestEntry&, const std::string&)>& on_error = {});

std::optional<Document> read_document(const CorpusManifest& manifest, const ManifestEntry& entry,
                                      const CleaningProfile& profile, std::string* error = nullptr);

}  // namespace craml
