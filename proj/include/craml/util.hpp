#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace craml {

// ---- text helpers ---------------------------------------------------------

std::string to_lower_ascii(std::string_view text);
std::string_view trim(std::string_view text);

/// Splits on runs of ASCII whitespace; never yields empty tokens.
std::vector<std::string> tokenize(std::string_view text);
std::vector<std::string_view> tokenize_view(std::string_view text);

/// Splits on every occurrence of `sep`; keeps empty pieces.
std::vector<std::string> split(std::string_view text, char sep);

std::string join(std::span<const std::string> parts, std::string_view sep);
std::string join(std::span<const std::string_view> parts, std::string_view sep);

std::string format_fixed(double value, int digits);

// ---- hashing --------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string hash_file(const std::filesystem::path& path);

// ---- files ----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// ---- random ---------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Uniform value in [0,1) that depends only on (seed, key).
double keyed_uniform(std::uint64_t seed, std::string_view key);

/// xoshiro256** seeded through splitmix64. Portable across standard
/// libraries, unlike the std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    double uniform();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }
    template <typename T>
    void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

private:
    std::uint64_t s_[4];
};

// ---- provenance -----------------------------------------------------------

/// Key/value block written as leading `# ` lines of every artifact.
struct Provenance {
    std::string artifact;
    std::vector<std::pair<std::string, std::string>> fields;

    Provenance& add(std::string key, std::string value);
    std::string get(std::string_view key, std::string_view fallback = "") const;
    bool has(std::string_view key) const;

    void write(std::ostream& out) const;
    /// Consumes leading comment lines. Returns an empty provenance if the
    /// stream does not start with one.
    static Provenance read(std::istream& in);
    static Provenance read_file(const std::filesystem::path& path);
};

std::string tool_version();

// ---- parallelism ----------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Exceptions from
/// workers are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

std::size_t default_jobs();

}  // namespace craml
