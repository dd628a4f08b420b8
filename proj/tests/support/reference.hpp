#pragma once

// Naive, deliberately slow re-implementations used as test oracles.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace craml::testing {

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

// Default cleaning profile, one character at a time (ASCII input only).
std::string reference_clean(const std::string& raw);

// All chunks of a cleaned document in emission order, deduplicated.
std::vector<std::string> reference_chunks(const std::string& clean_text, const std::vector<std::string>& keywords,
                                          std::size_t n);

struct RefRule {
    std::string pattern;
    int prio = 0;
    std::vector<std::optional<int>> values;
};

struct RefRow {
    std::string doc_id;
    std::string rule;
    std::size_t pw_length = 0;
    std::vector<int> values;
};

// chunk -> surviving training row, by brute force over chunks x rules.
std::map<std::string, RefRow> reference_training(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& rows, const std::vector<RefRule>& rules);

// Per-tag result of applying every rule in priority order.
std::vector<std::optional<int>> reference_apply(const std::string& chunk, const std::vector<RefRule>& rules,
                                                std::size_t tags);

}  // namespace craml::testing
