#include "craml/util.hpp"

#include "craml/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace craml {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string_view trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return text.substr(b, e - b);
}

std::vector<std::string_view> tokenize_view(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    auto views = tokenize_view(text);
    return {views.begin(), views.end()};
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            return out;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string join(std::span<const std::string_view> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_fixed(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail_io("cannot read " + path.string());
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail_io("write failed for " + path.string());
}

std::string hash_file(const std::filesystem::path& path) {
    return hex64(fnv1a64(read_file(path)));
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    splitmix64(state);
    return splitmix64(state);
}

double keyed_uniform(std::uint64_t seed, std::string_view key) {
    std::uint64_t state = seed ^ fnv1a64(key);
    std::uint64_t v = splitmix64(state);
    return static_cast<double>(v >> 11) * 0x1.0p-53;
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t state = seed;
    for (auto& s : s_) s = splitmix64(state);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    for (;;) {
        std::uint64_t v = next();
        if (v < limit) return v % bound;
    }
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Provenance& Provenance::add(std::string key, std::string value) {
    for (char& c : value) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    fields.emplace_back(std::move(key), std::move(value));
    return *this;
}

std::string Provenance::get(std::string_view key, std::string_view fallback) const {
    for (const auto& [k, v] : fields) {
        if (k == key) return v;
    }
    return std::string(fallback);
}

bool Provenance::has(std::string_view key) const {
    return std::any_of(fields.begin(), fields.end(),
                       [&](const auto& kv) { return kv.first == key; });
}

void Provenance::write(std::ostream& out) const {
    out << "# craml " << tool_version() << " artifact=" << artifact << '\n';
    for (const auto& [k, v] : fields) out << "# " << k << '=' << v << '\n';
}

Provenance Provenance::read(std::istream& in) {
    Provenance p;
    while (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view body = std::string_view(line).substr(1);
        body = trim(body);
        if (body.rfind("craml ", 0) == 0) {
            auto pos = body.find("artifact=");
            if (pos != std::string_view::npos) p.artifact = std::string(body.substr(pos + 9));
            continue;
        }
        auto eq = body.find('=');
        if (eq == std::string_view::npos) continue;
        p.fields.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
    }
    return p;
}

Provenance Provenance::read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open " + path.string());
    return read(in);
}

std::string tool_version() { return CRAML_VERSION; }

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::size_t default_jobs() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

}  // namespace craml
