#include "craml/corpus.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <json.hpp>

namespace craml {

namespace fs = std::filesystem;

namespace {

bool is_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_ascii_punct(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return u < 0x80 && u > 0x20 && u != 0x7f && !is_alnum(c);
}

// Copies `raw` replacing every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view raw, std::size_t& invalid) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        std::size_t len = 0;
        if (c < 0x80) len = 1;
        else if (c >= 0xC2 && c <= 0xDF) len = 2;
        else if (c >= 0xE0 && c <= 0xEF) len = 3;
        else if (c >= 0xF0 && c <= 0xF4) len = 4;
        bool ok = len > 0 && i + len <= raw.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(raw[i + k]);
            if ((cc & 0xC0) != 0x80) ok = false;
        }
        if (ok && len == 3) {
            unsigned char c1 = static_cast<unsigned char>(raw[i + 1]);
            if ((c == 0xE0 && c1 < 0xA0) || (c == 0xED && c1 > 0x9F)) ok = false;
        }
        if (ok && len == 4) {
            unsigned char c1 = static_cast<unsigned char>(raw[i + 1]);
            if ((c == 0xF0 && c1 < 0x90) || (c == 0xF4 && c1 > 0x8F)) ok = false;
        }
        if (ok) {
            out.append(raw.substr(i, len));
            i += len;
        } else {
            out += "\xEF\xBF\xBD";
            ++invalid;
            ++i;
        }
    }
    return out;
}

// Unicode punctuation that commonly survives PDF conversion.
constexpr std::string_view kUnicodePunct[] = {
    "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D",
    "\xE2\x80\x93", "\xE2\x80\x94", "\xE2\x80\xA6", "\xC2\xA0",
    "\xE2\x80\xA2",
};

std::string replace_words(std::string_view text, std::string_view from, std::string_view to) {
    if (from.empty()) return std::string(text);
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t hit = text.find(from, pos);
        if (hit == std::string_view::npos) break;
        std::size_t end = hit + from.size();
        bool left_ok = hit == 0 || !is_alnum(from.front()) || !is_alnum(text[hit - 1]);
        bool right_ok = end == text.size() || !is_alnum(from.back()) || !is_alnum(text[end]);
        if (left_ok && right_ok) {
            out.append(text.substr(pos, hit - pos));
            out.append(to);
            pos = end;
        } else {
            out.append(text.substr(pos, hit + 1 - pos));
            pos = hit + 1;
        }
    }
    out.append(text.substr(std::min(pos, text.size())));
    return out;
}

std::string clean_pass(std::string_view text, const CleaningProfile& profile) {
    std::string work = profile.lowercase ? to_lower_ascii(text) : std::string(text);
    for (const auto& [from, to] : profile.replacements) work = replace_words(work, from, to);

    std::string spaced;
    spaced.reserve(work.size() + work.size() / 8);
    for (std::size_t i = 0; i < work.size(); ++i) {
        char c = work[i];
        if (c == '|') {
            spaced += ' ';
            continue;
        }
        if (profile.stops.find(c) != std::string::npos) {
            spaced += ' ';
            spaced += c;
            spaced += ' ';
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            spaced += ' ';
            continue;
        }
        if (profile.strip_punctuation) {
            if (is_ascii_punct(c)) {
                spaced += ' ';
                continue;
            }
            if (static_cast<unsigned char>(c) >= 0x80) {
                bool matched = false;
                for (auto p : kUnicodePunct) {
                    if (work.compare(i, p.size(), p) == 0) {
                        spaced += ' ';
                        i += p.size() - 1;
                        matched = true;
                        break;
                    }
                }
                if (matched) continue;
            }
        }
        spaced += c;
    }
    return join(tokenize_view(spaced), " ");
}

}  // namespace

CleaningProfile CleaningProfile::parse(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail_data(std::string("cleaning profile: ") + e.what());
    }
    CleaningProfile p;
    p.lowercase = j.value("lowercase", true);
    p.strip_punctuation = j.value("strip_punctuation", true);
    p.stops = j.value("stops", std::string(".;?!"));
    if (p.stops.find('|') != std::string::npos) fail_data("cleaning profile: '|' cannot be a stop");
    if (j.contains("replacements")) {
        for (const auto& pair : j.at("replacements")) {
            if (!pair.is_array() || pair.size() != 2) fail_data("cleaning profile: replacements must be [from, to] pairs");
            std::string from = pair[0].get<std::string>();
            std::string to = pair[1].get<std::string>();
            if (p.lowercase) {
                from = to_lower_ascii(from);
                to = to_lower_ascii(to);
            }
            if (trim(from).empty()) fail_data("cleaning profile: empty replacement source");
            if (replace_words(to, from, "\x01").find('\x01') != std::string::npos) {
                fail_data("cleaning profile: replacement for '" + from + "' reintroduces its source");
            }
            p.replacements.emplace_back(std::move(from), std::move(to));
        }
    }
    return p;
}

CleaningProfile CleaningProfile::load(const fs::path& path) {
    return parse(read_file(path));
}

bool CleaningProfile::is_stop(std::string_view token) const {
    return token.size() == 1 && stops.find(token[0]) != std::string::npos;
}

std::string CleaningProfile::version() const {
    std::string canon = std::string(lowercase ? "L1" : "L0") + (strip_punctuation ? "P1" : "P0") + "S" + stops;
    for (const auto& [f, t] : replacements) canon += "\x1f" + f + "\x1e" + t;
    return "v1-" + hex64(fnv1a64(canon)).substr(0, 8);
}

std::string clean(std::string_view raw, const CleaningProfile& profile, CleanReport* report) {
    std::size_t invalid = 0;
    std::string text = sanitize_utf8(raw, invalid);
    if (report) report->invalid_bytes += invalid;
    // One pass can expose new replacement sites (e.g. stripped punctuation
    // becoming a word boundary), so iterate to a fixed point.
    std::string current = clean_pass(text, profile);
    for (int round = 0; round < 8; ++round) {
        std::string next = clean_pass(current, profile);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

// ---- metadata -------------------------------------------------------------

MetadataTable MetadataTable::parse(std::string_view text) {
    csv::ReadOptions opts;
    opts.provenance = false;
    csv::Table table = csv::parse_table(text, opts);
    if (table.header.empty()) fail_data("metadata: missing header row");
    std::optional<std::size_t> key = table.column("doc_id");
    if (!key) key = table.column("id");
    if (!key) fail_data("metadata: no doc_id column");
    MetadataTable out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i != *key) out.columns_.push_back(std::string(trim(table.header[i])));
    }
    std::size_t line = 1;
    for (auto& row : table.rows) {
        ++line;
        if (row.size() != table.header.size()) {
            fail_data("metadata: row " + std::to_string(line) + " has " + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(table.header.size()));
        }
        std::string id(trim(row[*key]));
        if (id.empty()) fail_data("metadata: empty doc_id on row " + std::to_string(line));
        std::vector<std::string> values;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i != *key) values.push_back(std::move(row[i]));
        }
        if (!out.rows_.emplace(id, std::move(values)).second) {
            fail_data("metadata: duplicate doc_id '" + id + "'");
        }
    }
    return out;
}

MetadataTable MetadataTable::load(const fs::path& path) {
    try {
        return parse(read_file(path));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

bool MetadataTable::contains(std::string_view doc_id) const {
    return rows_.find(std::string(doc_id)) != rows_.end();
}

const std::vector<std::string>* MetadataTable::find(std::string_view doc_id) const {
    auto it = rows_.find(std::string(doc_id));
    return it == rows_.end() ? nullptr : &it->second;
}

std::string MetadataTable::value(std::string_view doc_id, std::string_view column) const {
    const auto* row = find(doc_id);
    if (!row) return {};
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i] == column) return (*row)[i];
    }
    return {};
}

std::vector<std::string> MetadataTable::doc_ids() const {
    std::vector<std::string> ids;
    ids.reserve(rows_.size());
    for (const auto& [k, v] : rows_) ids.push_back(k);
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---- manifest -------------------------------------------------------------

const ManifestEntry* CorpusManifest::find(std::string_view doc_id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), doc_id,
                               [](const ManifestEntry& e, std::string_view id) { return e.doc_id < id; });
    if (it == entries.end() || it->doc_id != doc_id) return nullptr;
    return &*it;
}

void CorpusManifest::write(const fs::path& dir) const {
    Provenance prov;
    prov.artifact = "manifest";
    prov.add("root", root.generic_string());
    prov.add("documents", std::to_string(entries.size()));
    prov.add("profile", profile_version);
    {
        csv::FileWriter w(dir / "manifest.csv", &prov);
        w.write({"doc_id", "path", "bytes"});
        for (const auto& e : entries) w.write({e.doc_id, e.path, std::to_string(e.bytes)});
        w.close();
    }
    Provenance oprov;
    oprov.artifact = "orphans";
    oprov.add("root", root.generic_string());
    {
        csv::FileWriter w(dir / "orphans.csv", &oprov);
        w.write({"doc_id", "path"});
        for (const auto& id : orphans) {
            const auto* e = find(id);
            w.write({id, e ? e->path : std::string()});
        }
        w.close();
    }
    Provenance eprov;
    eprov.artifact = "ingest-errors";
    eprov.add("root", root.generic_string());
    {
        csv::FileWriter w(dir / "errors.csv", &eprov);
        w.write({"path", "error"});
        for (const auto& e : errors) w.write({e.path, e.message});
        w.close();
    }
}

CorpusManifest CorpusManifest::load(const fs::path& manifest_csv) {
    csv::Table t = csv::read_table(manifest_csv, {.delimiter = ','});
    if (t.provenance.artifact != "manifest") fail_data(manifest_csv.string() + " is not a corpus manifest");
    CorpusManifest m;
    m.root = t.provenance.get("root");
    m.profile_version = t.provenance.get("profile");
    auto id = t.require_column("doc_id");
    auto path = t.require_column("path");
    auto bytes = t.require_column("bytes");
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) fail_data(manifest_csv.string() + ": malformed row");
        m.entries.push_back({row[id], row[path], std::stoull(row[bytes])});
    }
    std::size_t declared = std::stoull(t.provenance.get("documents", "0"));
    if (declared != m.entries.size()) fail_data(manifest_csv.string() + ": document count mismatch");
    fs::path orphans = manifest_csv.parent_path() / "orphans.csv";
    if (fs::exists(orphans)) {
        csv::Table o = csv::read_table(orphans, {.delimiter = ','});
        for (const auto& row : o.rows) {
            if (!row.empty()) m.orphans.push_back(row[0]);
        }
    }
    return m;
}

std::string make_doc_id(const fs::path& relative) {
    fs::path p = relative;
    p.replace_extension();
    return p.generic_string();
}

CorpusManifest ingest(const fs::path& root, const std::optional<fs::path>& metadata,
                      const IngestOptions& options) {
    if (!fs::is_directory(root)) fail_data("corpus root is not a directory: " + root.string());
    CorpusManifest manifest;
    manifest.root = fs::weakly_canonical(fs::absolute(root));
    manifest.profile_version = options.profile_version;

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(manifest.root)) {
        if (!entry.is_regular_file()) continue;
        if (!options.extension.empty() &&
            to_lower_ascii(entry.path().extension().string()) != to_lower_ascii(options.extension)) {
            continue;
        }
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::map<std::string, std::vector<ManifestEntry>> by_id;
    for (const auto& file : files) {
        fs::path rel = fs::relative(file, manifest.root);
        std::ifstream probe(file, std::ios::binary);
        if (!probe) {
            manifest.errors.push_back({rel.generic_string(), "unreadable"});
            continue;
        }
        std::error_code ec;
        auto size = fs::file_size(file, ec);
        if (ec) {
            manifest.errors.push_back({rel.generic_string(), ec.message()});
            continue;
        }
        ManifestEntry e{make_doc_id(rel), rel.generic_string(), size};
        by_id[e.doc_id].push_back(std::move(e));
    }

    std::map<std::string, ManifestEntry> unique;
    auto insert_unique = [&](ManifestEntry e) {
        auto [it, inserted] = unique.emplace(e.doc_id, e);
        if (!inserted) {
            fail_data("duplicate doc_id '" + e.doc_id + "' for " + it->second.path + " and " + e.path);
        }
    };
    for (auto& [id, group] : by_id) {
        if (group.size() == 1) {
            insert_unique(std::move(group.front()));
            continue;
        }
        for (auto& e : group) {
            e.doc_id = id + "#" + hash_file(manifest.root / e.path).substr(0, 8);
            insert_unique(std::move(e));
        }
    }
    for (auto& [id, e] : unique) manifest.entries.push_back(std::move(e));

    if (metadata) {
        MetadataTable meta = MetadataTable::load(*metadata);
        for (const auto& e : manifest.entries) {
            if (!meta.contains(e.doc_id)) manifest.orphans.push_back(e.doc_id);
        }
    }
    return manifest;
}

std::optional<Document> read_document(const CorpusManifest& manifest, const ManifestEntry& entry,
                                      const CleaningProfile& profile, std::string* error) {
    std::ifstream in(manifest.absolute(entry), std::ios::binary);
    if (!in) {
        if (error) *error = "cannot open " + (manifest.absolute(entry)).string();
        return std::nullopt;
    }
    Document doc;
    doc.doc_id = entry.doc_id;
    doc.raw_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (in.bad()) {
        if (error) *error = "read failed for " + (manifest.absolute(entry)).string();
        return std::nullopt;
    }
    doc.clean_text = clean(doc.raw_text, profile);
    return doc;
}

void for_each_document(const CorpusManifest& manifest, const CleaningProfile& profile, std::size_t jobs,
                       const std::function<void(std::size_t, Document&&)>& fn,
                       const std::function<void(const ManifestEntry&, const std::string&)>& on_error) {
    parallel_for(manifest.entries.size(), jobs, [&](std::size_t i) {
        std::string err;
        auto doc = read_document(manifest, manifest.entries[i], profile, &err);
        if (!doc) {
            if (on_error) on_error(manifest.entries[i], err);
            return;
        }
        fn(i, std::move(*doc));
    });
}

}  // namespace craml
