#include "craml/extraction.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"

#include <algorithm>
#include <memory>
#include <json.hpp>
#include <optional>
#include <unordered_set>

namespace craml {

namespace fs = std::filesystem;

WindowUnit parse_window_unit(std::string_view text) {
    if (text == "words") return WindowUnit::words;
    if (text == "sentences") return WindowUnit::sentences;
    fail_usage("window unit must be 'words' or 'sentences', got '" + std::string(text) + "'");
}

std::string_view to_string(WindowUnit unit) {
    return unit == WindowUnit::words ? "words" : "sentences";
}

// ---- keyword config -------------------------------------------------------

KeywordConfig::KeywordConfig(std::vector<TagKeywords> tags) : tags_(std::move(tags)) {
    for (auto& t : tags_) {
        if (t.tag.empty()) fail_data("keywords: empty tag name");
        for (auto& k : t.keywords) {
            k = to_lower_ascii(k);
            if (trim(k).empty()) fail_data("keywords: tag '" + t.tag + "' has an empty keyword");
        }
        if (t.keywords.empty()) fail_data("keywords: tag '" + t.tag + "' has no keywords");
    }
    std::sort(tags_.begin(), tags_.end(), [](const auto& a, const auto& b) { return a.tag < b.tag; });
    for (std::size_t i = 1; i < tags_.size(); ++i) {
        if (tags_[i].tag == tags_[i - 1].tag) fail_data("keywords: duplicate tag '" + tags_[i].tag + "'");
    }
}

KeywordConfig KeywordConfig::parse(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail_data(std::string("keywords: ") + e.what());
    }
    if (!j.is_object()) fail_data("keywords: expected an object mapping tag to keyword list");
    std::vector<TagKeywords> tags;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_array()) fail_data("keywords: tag '" + it.key() + "' must map to a list");
        TagKeywords tk{it.key(), {}};
        for (const auto& k : it.value()) {
            if (!k.is_string()) fail_data("keywords: non-string keyword under '" + it.key() + "'");
            tk.keywords.push_back(k.get<std::string>());
        }
        tags.push_back(std::move(tk));
    }
    if (tags.empty()) fail_data("keywords: no tags defined");
    return KeywordConfig(std::move(tags));
}

KeywordConfig KeywordConfig::load(const fs::path& path) {
    try {
        return parse(read_file(path));
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::string KeywordConfig::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& t : tags_) j[t.tag] = t.keywords;
    return j.dump(2) + "\n";
}

bool KeywordConfig::has_tag(std::string_view tag) const {
    return std::any_of(tags_.begin(), tags_.end(), [&](const auto& t) { return t.tag == tag; });
}

const std::vector<std::string>& KeywordConfig::keywords_for(std::string_view tag) const {
    for (const auto& t : tags_) {
        if (t.tag == tag) return t.keywords;
    }
    fail_data("keywords: no keyword list for tag '" + std::string(tag) + "'");
}

std::vector<std::string> KeywordConfig::all_keywords() const {
    std::vector<std::string> out;
    for (const auto& t : tags_) out.insert(out.end(), t.keywords.begin(), t.keywords.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string KeywordConfig::hash() const {
    std::string canon;
    for (const auto& t : tags_) {
        canon += t.tag;
        for (const auto& k : t.keywords) canon += "\x1f" + k;
        canon += "\x1e";
    }
    return hex64(fnv1a64(canon));
}

// ---- matching and windows -------------------------------------------------

bool contains_keyword(std::string_view text, std::span<const std::string> keywords) {
    for (const auto& k : keywords) {
        if (!k.empty() && text.find(k) != std::string_view::npos) return true;
    }
    return false;
}

Chunk get_context(std::span<const std::string> sentence, std::size_t hit, std::size_t n) {
    Chunk c;
    if (sentence.empty()) return c;
    hit = std::min(hit, sentence.size() - 1);
    std::size_t left = hit >= n ? hit - n : 0;
    std::size_t right = std::min(sentence.size(), hit + n + 1);
    for (std::size_t i = left; i < right; ++i) {
        if (i > left) c.text += ' ';
        c.text += sentence[i];
    }
    c.keyword_index = hit - left;
    return c;
}

namespace {

struct Hit {
    std::size_t token;
    std::size_t pos;
    std::size_t keyword;
};

std::size_t first_non_space(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != ' ') return i;
    }
    return 0;
}

// Keyword hits in a space-joined token sequence, ordered by position.
std::vector<Hit> find_hits(std::span<const std::string> tokens, std::span<const std::string> keywords) {
    std::string joined;
    std::vector<std::size_t> starts;
    starts.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) joined += ' ';
        starts.push_back(joined.size());
        joined += tokens[i];
    }
    std::vector<Hit> hits;
    for (std::size_t k = 0; k < keywords.size(); ++k) {
        const std::string& kw = keywords[k];
        if (kw.empty()) continue;
        std::size_t anchor_off = first_non_space(kw);
        for (std::size_t pos = joined.find(kw); pos != std::string::npos; pos = joined.find(kw, pos + 1)) {
            std::size_t anchor = pos + anchor_off;
            auto it = std::upper_bound(starts.begin(), starts.end(), anchor);
            std::size_t token = static_cast<std::size_t>(it - starts.begin()) - 1;
            hits.push_back({token, pos, k});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.token != b.token) return a.token < b.token;
        if (a.pos != b.pos) return a.pos < b.pos;
        return a.keyword < b.keyword;
    });
    return hits;
}

std::vector<std::vector<std::string>> split_sentences(std::string_view clean_text, const CleaningProfile& profile) {
    std::vector<std::vector<std::string>> sentences(1);
    for (auto tok : tokenize_view(clean_text)) {
        if (profile.is_stop(tok)) {
            if (!sentences.back().empty()) sentences.emplace_back();
            continue;
        }
        sentences.back().emplace_back(tok);
    }
    if (sentences.back().empty()) sentences.pop_back();
    return sentences;
}

}  // namespace

std::optional<std::size_t> locate_keyword(std::string_view chunk, std::span<const std::string> keywords) {
    auto tokens = tokenize(chunk);
    auto hits = find_hits(tokens, keywords);
    if (hits.empty()) return std::nullopt;
    auto best = std::min_element(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
    return best->token;
}

std::vector<Chunk> extract_chunks(std::string_view clean_text, std::span<const std::string> keywords,
                                  const WindowConfig& window, const CleaningProfile& profile,
                                  std::string_view doc_id) {
    std::vector<Chunk> out;
    if (!contains_keyword(clean_text, keywords)) return out;
    auto sentences = split_sentences(clean_text, profile);
    std::unordered_set<std::string> seen;
    auto emit = [&](Chunk&& c, const std::string& kw) {
        if (!seen.insert(c.text).second) return;
        c.doc_id = std::string(doc_id);
        c.keyword = kw;
        out.push_back(std::move(c));
    };
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const auto& sentence = sentences[s];
        auto hits = find_hits(sentence, keywords);
        if (hits.empty()) continue;
        if (window.unit == WindowUnit::words) {
            for (const auto& h : hits) emit(get_context(sentence, h.token, window.n), keywords[h.keyword]);
            continue;
        }
        std::size_t first = s >= window.n ? s - window.n : 0;
        std::size_t last = std::min(sentences.size() - 1, s + window.n);
        std::vector<std::string> tokens;
        std::size_t offset = 0;
        for (std::size_t k = first; k <= last; ++k) {
            if (k == s) offset = tokens.size();
            tokens.insert(tokens.end(), sentences[k].begin(), sentences[k].end());
        }
        for (const auto& h : hits) {
            Chunk c;
            c.text = join(tokens, " ");
            c.keyword_index = offset + h.token;
            emit(std::move(c), keywords[h.keyword]);
        }
    }
    return out;
}

// ---- extract corpus -------------------------------------------------------

namespace {

class PartitionedWriter {
public:
    PartitionedWriter(fs::path dir, Provenance base, std::vector<std::string> header, std::size_t rows_per_file)
        : dir_(std::move(dir)), base_(std::move(base)), header_(std::move(header)),
          rows_per_file_(std::max<std::size_t>(1, rows_per_file)) {}

    void write(const csv::Row& row) {
        if (!writer_ || rows_in_file_ >= rows_per_file_) open_next();
        writer_->write(row);
        ++rows_in_file_;
    }

    std::vector<fs::path> finish() {
        if (!writer_) open_next();
        writer_->close();
        writer_.reset();
        return std::move(files_);
    }

private:
    void open_next() {
        if (writer_) writer_->close();
        char name[32];
        std::snprintf(name, sizeof name, "part-%05zu.csv", files_.size());
        Provenance p = base_;
        p.add("part", std::to_string(files_.size()));
        files_.push_back(dir_ / name);
        writer_ = std::make_unique<csv::FileWriter>(files_.back(), &p);
        writer_->write(header_);
        rows_in_file_ = 0;
    }

    fs::path dir_;
    Provenance base_;
    std::vector<std::string> header_;
    std::size_t rows_per_file_;
    std::size_t rows_in_file_ = 0;
    std::unique_ptr<csv::FileWriter> writer_;
    std::vector<fs::path> files_;
};

}  // namespace

ExtractResult extract_corpus(const CorpusManifest& manifest, const MetadataTable* metadata,
                             const KeywordConfig& config, const CleaningProfile& profile,
                             const fs::path& out_dir, const ExtractOptions& options) {
    if (options.window.n < 1) fail_usage("window size n must be >= 1");
    if (!(options.sample > 0.0 && options.sample <= 1.0)) fail_usage("sample fraction must be in (0, 1]");
    if (config.tags().empty()) fail_data("keywords: no tags defined");
    fs::create_directories(out_dir);
    write_file(out_dir / "keywords.json", config.to_json());

    std::vector<std::string> header{"id"};
    if (metadata) header.insert(header.end(), metadata->columns().begin(), metadata->columns().end());
    header.push_back("text");

    const auto& tags = config.tags();
    std::vector<std::unique_ptr<PartitionedWriter>> writers;
    for (const auto& t : tags) {
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(out_dir / t.tag, ec)) {
            auto name = e.path().filename().string();
            if (name.starts_with("part-") && name.ends_with(".csv")) fs::remove(e.path());
        }
        Provenance p;
        p.artifact = "extract";
        p.add("tag", t.tag);
        p.add("keywords_hash", config.hash());
        p.add("window", std::to_string(options.window.n));
        p.add("unit", std::string(to_string(options.window.unit)));
        p.add("profile", profile.version());
        p.add("documents", std::to_string(manifest.entries.size()));
        p.add("sample", format_fixed(options.sample, 6));
        p.add("sample_seed", std::to_string(options.sample_seed));
        writers.push_back(std::make_unique<PartitionedWriter>(out_dir / t.tag, std::move(p), header,
                                                              options.rows_per_file));
    }

    ExtractResult result;
    result.documents = manifest.entries.size();
    const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
    const std::size_t batch = jobs * 16;
    struct Slot {
        bool ok = false;
        std::string error;
        std::vector<std::vector<std::string>> per_tag;
    };
    std::vector<Slot> slots;
    for (std::size_t begin = 0; begin < manifest.entries.size(); begin += batch) {
        std::size_t end = std::min(manifest.entries.size(), begin + batch);
        slots.assign(end - begin, Slot{});
        parallel_for(end - begin, jobs, [&](std::size_t k) {
            const auto& entry = manifest.entries[begin + k];
            Slot& slot = slots[k];
            if (options.sample < 1.0 && !keep_row(entry.doc_id, options.sample, options.sample_seed)) {
                slot.ok = true;
                slot.per_tag.resize(tags.size());
                return;
            }
            auto doc = read_document(manifest, entry, profile, &slot.error);
            if (!doc) return;
            slot.ok = true;
            slot.per_tag.resize(tags.size());
            for (std::size_t t = 0; t < tags.size(); ++t) {
                for (auto& c : extract_chunks(doc->clean_text, tags[t].keywords, options.window, profile, entry.doc_id)) {
                    slot.per_tag[t].push_back(std::move(c.text));
                }
            }
        });
        for (std::size_t k = 0; k < slots.size(); ++k) {
            const auto& entry = manifest.entries[begin + k];
            Slot& slot = slots[k];
            if (!slot.ok) {
                result.errors.push_back({entry.path, slot.error});
                continue;
            }
            bool any = false;
            for (std::size_t t = 0; t < tags.size(); ++t) {
                if (slot.per_tag[t].empty()) continue;
                any = true;
                csv::Row row{entry.doc_id};
                if (metadata) {
                    const auto* values = metadata->find(entry.doc_id);
                    for (std::size_t c = 0; c < metadata->columns().size(); ++c) {
                        row.push_back(values ? (*values)[c] : std::string());
                    }
                }
                row.push_back(join(slot.per_tag[t], "|"));
                writers[t]->write(row);
                ++result.rows_written;
                result.chunks_written += slot.per_tag[t].size();
            }
            if (any) ++result.documents_with_hits;
        }
    }
    for (auto& w : writers) {
        auto files = w->finish();
        result.files.insert(result.files.end(), files.begin(), files.end());
    }
    return result;
}

// ---- reading --------------------------------------------------------------

ExtractFile read_extract_file(const fs::path& path) {
    csv::Table t = csv::read_table(path, {.delimiter = ','});
    ExtractFile f;
    f.path = path;
    f.provenance = t.provenance;
    if (t.header.size() < 2 || t.header.front() != "id" || t.header.back() != "text") {
        fail_data(path.string() + ": extract header must be id,<metadata...>,text");
    }
    f.metadata_columns.assign(t.header.begin() + 1, t.header.end() - 1);
    for (auto& row : t.rows) {
        if (row.size() != t.header.size()) {
            ++f.malformed;
            continue;
        }
        ExtractRow r;
        r.doc_id = std::move(row.front());
        r.metadata.assign(row.begin() + 1, row.end() - 1);
        for (auto& piece : split(row.back(), '|')) {
            if (!trim(piece).empty()) r.chunks.push_back(std::move(piece));
        }
        f.rows.push_back(std::move(r));
    }
    return f;
}

std::vector<fs::path> list_extract_files(const fs::path& dir) {
    std::vector<fs::path> out;
    if (fs::is_regular_file(dir)) {
        out.push_back(dir);
        return out;
    }
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        if (Provenance::read_file(e.path()).artifact == "extract") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void for_each_extract_row(std::span<const fs::path> files,
                          const std::function<void(const ExtractFile&, const ExtractRow&)>& fn) {
    for (const auto& path : files) {
        ExtractFile f = read_extract_file(path);
        for (const auto& row : f.rows) fn(f, row);
    }
}

bool keep_row(std::string_view doc_id, double fraction, std::uint64_t seed) {
    if (fraction >= 1.0) return true;
    return keyed_uniform(seed, doc_id) < fraction;
}

std::vector<fs::path> sample_extract(std::span<const fs::path> files, double fraction, std::uint64_t seed,
                                     const fs::path& out_dir) {
    if (!(fraction > 0.0 && fraction <= 1.0)) fail_usage("sample fraction must be in (0, 1]");
    std::vector<fs::path> out;
    for (const auto& path : files) {
        ExtractFile f = read_extract_file(path);
        Provenance p = f.provenance;
        p.artifact = "extract";
        p.add("subsample", format_fixed(fraction, 6));
        p.add("subsample_seed", std::to_string(seed));
        fs::path target = out_dir / path.parent_path().filename() / path.filename();
        csv::FileWriter w(target, &p);
        csv::Row header{"id"};
        header.insert(header.end(), f.metadata_columns.begin(), f.metadata_columns.end());
        header.push_back("text");
        w.write(header);
        for (const auto& r : f.rows) {
            if (!keep_row(r.doc_id, fraction, seed)) continue;
            csv::Row row{r.doc_id};
            row.insert(row.end(), r.metadata.begin(), r.metadata.end());
            row.push_back(join(r.chunks, "|"));
            w.write(row);
        }
        w.close();
        out.push_back(target);
    }
    return out;
}

}  // namespace craml
