#include "craml/rules.hpp"

#include "craml/csv.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace craml {

namespace {

std::string summarize(const std::string& source, const std::vector<RuleRowError>& errors) {
    std::ostringstream out;
    out << source << ": " << errors.size() << " rule error(s)";
    for (const auto& e : errors) {
        out << "\n  ";
        if (e.line) out << "line " << e.line << ": ";
        out << e.message;
    }
    return out.str();
}

bool has_backreference(std::string_view re) {
    bool in_class = false;
    for (std::size_t i = 0; i + 1 < re.size(); ++i) {
        if (re[i] == '\\') {
            char next = re[i + 1];
            if (!in_class && next >= '1' && next <= '9') return true;
            ++i;
            continue;
        }
        if (re[i] == '[') in_class = true;
        else if (re[i] == ']') in_class = false;
    }
    return false;
}

}  // namespace

RuleSetError::RuleSetError(std::string source, std::vector<RuleRowError> errors)
    : Error(ErrorKind::data, summarize(source, errors)), errors_(std::move(errors)) {}

bool Rule::matches(std::string_view chunk) const {
    if (regex) return std::regex_search(chunk.begin(), chunk.end(), *compiled);
    return chunk.find(pattern) != std::string_view::npos;
}

std::string Rule::display() const {
    return regex ? std::string(kRegexPrefix) + pattern : pattern;
}

std::size_t Rule::token_count() const { return tokenize_view(pattern).size(); }

RuleSet RuleSet::parse(std::string_view text, std::string source) {
    RuleSet rs;
    rs.source_ = std::move(source);
    rs.hash_ = hex64(fnv1a64(text));

    std::istringstream in{std::string(text)};
    Provenance::read(in);
    csv::Reader reader(in, ',');
    csv::Row header;
    std::vector<RuleRowError> errors;
    if (!reader.next(header) || header.size() < 3) {
        throw RuleSetError(rs.source_, {{1, "header must be rule,prio,<tag>[,<tag>...]"}});
    }
    for (auto& h : header) h = std::string(trim(h));
    if (!header[0].empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    if (header[0] != "rule" || header[1] != "prio") {
        throw RuleSetError(rs.source_, {{reader.line(), "header must start with rule,prio"}});
    }
    rs.tags_.assign(header.begin() + 2, header.end());
    std::set<std::string> tag_names;
    for (const auto& t : rs.tags_) {
        if (t.empty()) errors.push_back({reader.line(), "empty tag name in header"});
        else if (!tag_names.insert(t).second) errors.push_back({reader.line(), "duplicate tag '" + t + "'"});
    }

    std::set<std::pair<std::string, int>> seen;
    csv::Row row;
    std::size_t order = 0;
    while (reader.next(row)) {
        std::size_t line = reader.line();
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() != header.size()) {
            errors.push_back({line, "expected " + std::to_string(header.size()) + " fields, found " +
                                        std::to_string(row.size())});
            continue;
        }
        Rule r;
        r.line = line;
        r.order = order++;
        std::string_view raw = row[0];
        if (raw.rfind(kRegexPrefix, 0) == 0) {
            r.regex = true;
            r.pattern = std::string(trim(raw.substr(kRegexPrefix.size())));
            if (r.pattern.empty()) {
                errors.push_back({line, "empty regular expression"});
                continue;
            }
            if (has_backreference(r.pattern)) {
                errors.push_back({line, "backreferences are not supported: " + r.pattern});
                continue;
            }
            try {
                r.compiled = std::make_shared<const std::regex>(
                    r.pattern, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
            } catch (const std::regex_error& e) {
                errors.push_back({line, "invalid regular expression '" + r.pattern + "': " + e.what()});
                continue;
            }
        } else {
            r.pattern = to_lower_ascii(raw);
            if (trim(r.pattern).empty()) {
                errors.push_back({line, "empty rule pattern"});
                continue;
            }
        }
        std::string_view prio = trim(row[1]);
        int p = -1;
        auto [ptr, ec] = std::from_chars(prio.data(), prio.data() + prio.size(), p);
        if (ec != std::errc() || ptr != prio.data() + prio.size() || p < 0) {
            errors.push_back({line, "prio must be a non-negative integer, got '" + std::string(prio) + "'"});
            continue;
        }
        r.prio = p;
        bool bad = false;
        bool any = false;
        for (std::size_t t = 0; t < rs.tags_.size(); ++t) {
            std::string_view cell = trim(row[2 + t]);
            if (cell.empty()) {
                r.values.emplace_back();
            } else if (cell == "0" || cell == "1") {
                r.values.emplace_back(static_cast<std::uint8_t>(cell[0] - '0'));
                any = true;
            } else {
                errors.push_back({line, "value for tag '" + rs.tags_[t] + "' must be 0 or 1, got '" +
                                            std::string(cell) + "'"});
                bad = true;
                break;
            }
        }
        if (bad) continue;
        if (!any) {
            errors.push_back({line, "rule sets no tag values"});
            continue;
        }
        if (!seen.emplace(r.display(), r.prio).second) {
            errors.push_back({line, "duplicate rule '" + r.display() + "' at prio " + std::to_string(r.prio)});
            continue;
        }
        rs.rules_.push_back(std::move(r));
    }
    if (!errors.empty()) throw RuleSetError(rs.source_, std::move(errors));
    if (rs.rules_.empty()) throw RuleSetError(rs.source_, {{0, "no rules"}});
    if (std::none_of(rs.rules_.begin(), rs.rules_.end(), [](const Rule& r) { return r.prio == 0; })) {
        throw RuleSetError(rs.source_, {{0, "no prio-0 rule"}});
    }
    std::stable_sort(rs.rules_.begin(), rs.rules_.end(),
                     [](const Rule& a, const Rule& b) { return a.prio < b.prio; });
    return rs;
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
}

std::optional<std::size_t> RuleSet::tag_index(std::string_view tag) const {
    for (std::size_t i = 0; i < tags_.size(); ++i) {
        if (tags_[i] == tag) return i;
    }
    return std::nullopt;
}

bool RuleSet::any_match(std::string_view chunk) const {
    return std::any_of(rules_.begin(), rules_.end(), [&](const Rule& r) { return r.matches(chunk); });
}

std::string RuleSet::to_csv() const {
    std::vector<const Rule*> ordered;
    for (const auto& r : rules_) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const Rule* a, const Rule* b) { return a->order < b->order; });
    std::ostringstream out;
    csv::Writer w(out);
    csv::Row header{"rule", "prio"};
    header.insert(header.end(), tags_.begin(), tags_.end());
    w.write(header);
    for (const Rule* r : ordered) {
        csv::Row row{r->display(), std::to_string(r->prio)};
        for (const auto& v : r->values) row.push_back(v ? std::to_string(*v) : std::string());
        w.write(row);
    }
    return std::move(out).str();
}

RuleOutcome apply_rules(std::string_view chunk, const RuleSet& ruleset) {
    RuleOutcome out;
    out.values.assign(ruleset.tags().size(), std::nullopt);
    for (const auto& rule : ruleset.rules()) {
        if (!rule.matches(chunk)) continue;
        for (std::size_t t = 0; t < rule.values.size(); ++t) {
            if (rule.values[t]) out.values[t] = rule.values[t];
        }
        out.winner = &rule;
    }
    return out;
}

RuleCoverage rule_coverage(const RuleSet& ruleset, std::span<const std::string> chunks) {
    RuleCoverage cov;
    const auto& rules = ruleset.rules();
    cov.matches.assign(rules.size(), 0);
    cov.wins.assign(rules.size(), 0);
    for (const auto& chunk : chunks) {
        ++cov.chunks;
        const Rule* winner = nullptr;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (rules[i].matches(chunk)) {
                ++cov.matches[i];
                winner = &rules[i];
            }
        }
        if (winner) ++cov.wins[static_cast<std::size_t>(winner - rules.data())];
        else ++cov.unmatched;
    }
    return cov;
}

}  // namespace craml
