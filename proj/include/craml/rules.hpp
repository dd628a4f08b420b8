#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/error.hpp"

namespace craml {

inline constexpr std::string_view kRegexPrefix = "REGEX:::";

using TagValue = std::optional<std::uint8_t>;

/// One row of a rule file. A blank tag cell leaves that tag untouched.
struct Rule {
    std::string pattern;  // literal (lowercased) or regex body without prefix
    bool regex = false;
    int prio = 0;
    std::vector<TagValue> values;  // parallel to RuleSet::tags()
    std::size_t order = 0;         // position in the file, 0-based
    std::size_t line = 0;          // physical line in the file
    std::shared_ptr<const std::regex> compiled;

    bool matches(std::string_view chunk) const;
    /// Pattern as written in a rule file, including any regex prefix.
    std::string display() const;
    std::size_t token_count() const;
};

struct RuleRowError {
    std::size_t line = 0;
    std::string message;
};

class RuleSetError : public Error {
public:
    RuleSetError(std::string source, std::vector<RuleRowError> errors);
    const std::vector<RuleRowError>& errors() const { return errors_; }

private:
    std::vector<RuleRowError> errors_;
};

/// Parsed rule file: header `rule,prio,<tag>[,<tag>...]`. Rules are kept
/// stable-sorted by (prio, file order).
class RuleSet {
public:
    static RuleSet load(const std::filesystem::path& path);
    static RuleSet parse(std::string_view text, std::string source = "<inline>");

    const std::vector<std::string>& tags() const { return tags_; }
    const std::vector<Rule>& rules() const { return rules_; }
    const std::string& source() const { return source_; }
    const std::string& content_hash() const { return hash_; }
    std::optional<std::size_t> tag_index(std::string_view tag) const;

    /// True when any rule matches; used for negative sampling.
    bool any_match(std::string_view chunk) const;

    /// Canonical rule-file text (header plus rows in file order).
    std::string to_csv() const;

private:
    std::vector<std::string> tags_;
    std::vector<Rule> rules_;
    std::string source_;
    std::string hash_;
};

struct RuleOutcome {
    std::vector<TagValue> values;  // unset when no matching rule sets the tag
    const Rule* winner = nullptr;  // highest prio match, later file order on ties

    bool matched() const { return winner != nullptr; }
    /// Resolved 0/1 value; unset tags read as 0.
    std::uint8_t value(std::size_t tag) const { return values[tag].value_or(0); }
};

/// Evaluates every rule in ascending priority; each match overwrites the
/// tags it sets.
RuleOutcome apply_rules(std::string_view chunk, const RuleSet& ruleset);

struct RuleCoverage {
    std::vector<std::size_t> matches;  // per rule, in RuleSet::rules() order
    std::vector<std::size_t> wins;
    std::size_t chunks = 0;
    std::size_t unmatched = 0;
};

RuleCoverage rule_coverage(const RuleSet& ruleset, std::span<const std::string> chunks);

}  // namespace craml
