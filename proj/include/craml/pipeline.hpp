#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/dataset.hpp"
#include "craml/extraction.hpp"
#include "craml/learning/model.hpp"
#include "craml/ngram.hpp"

namespace craml {

inline const std::vector<std::string> kPipelineSteps = {"ingest",   "extract", "ngrams",    "extrapolate", "validate",
                                                        "train",    "classify", "aggregate", "store"};

struct PipelineSeeds {
    std::uint64_t extract = 0;
    std::uint64_t extrapolate = 0;
    std::uint64_t validate = 0;
    std::uint64_t train = 0;
};

/// Loaded from JSON. Relative paths resolve against the config file's
/// directory. Seeds have no defaults.
struct ProjectConfig {
    std::filesystem::path corpus;
    std::optional<std::filesystem::path> metadata;
    std::filesystem::path keywords;
    std::optional<std::filesystem::path> profile;
    std::vector<std::filesystem::path> rules;
    std::filesystem::path project;

    WindowConfig window;
    double extract_sample = 1.0;

    std::size_t ngram_n = 3;
    Centering ngram_center = Centering::midpoint;

    double rate = 1.0;
    bool augment_positives = false;
    bool negative_sampling = false;
    std::optional<double> negative_ratio;

    std::size_t validate_per_rule = 10;
    double positive_boost = 1.0;

    std::vector<Family> families = {Family::random_forest};
    std::string grid = "default";
    std::size_t folds = 5;
    bool purify = false;
    std::vector<std::string> train_tags;  // empty trains every rule tag
    std::map<std::string, TrimConfig> trim;

    Level level = Level::record;
    std::string database = "craml.db";

    PipelineSeeds seeds;
    std::size_t jobs = 1;

    static ProjectConfig load(const std::filesystem::path& path);
    static ProjectConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);
};

struct StepReport {
    std::string step;
    std::string status;  // "ran" or "up-to-date"
    std::string input_hash;
    std::vector<std::string> artifacts;  // project-relative
    double seconds = 0.0;
};

struct RunManifest {
    std::vector<StepReport> steps;
    const StepReport* find(std::string_view step) const;
};

struct RunOptions {
    std::vector<std::string> steps;  // empty runs all
    bool force = false;
    std::ostream* log = nullptr;
};

/// Runs the requested steps in pipeline order. A step is skipped when its
/// recorded input hash and artifact hashes are unchanged. Project layout:
/// corpus/ extracts/ ngrams/ rules/ training/ models/ output/ plus
/// run_manifest.json.
RunManifest run_pipeline(const ProjectConfig& config, const RunOptions& options = {});

struct TrainRequest {
    std::filesystem::path training;
    std::string tag;
    std::vector<Family> families = {Family::random_forest};
    std::string grid = "default";
    std::size_t folds = 5;
    bool purify = false;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::optional<TrimConfig> trim;
    std::filesystem::path models_dir;
};

struct TrainedModel {
    Family family = Family::random_forest;
    Params params;
    double cv_f1 = 0.0;
    MetricsReport metrics;
    bool purified = false;
    std::filesystem::path file;
    std::filesystem::path grid_file;
    bool selected = false;
};

/// Grid search + fit per family, writing `<family>_<tag>_<f1>.json` and
/// `grid_<family>_<tag>.csv` into models_dir. The best held-out F1 is
/// marked selected (first family wins ties).
std::vector<TrainedModel> train_models(const TrainRequest& request, std::ostream* log = nullptr);

/// Replaces the tag's rows in models/metrics.csv and its registry entry.
void record_trained(const std::filesystem::path& models_dir, const std::string& tag,
                    std::span<const TrainedModel> models);

struct MetricsRow {
    std::string tag;
    std::string family;
    std::string params;
    double cv_f1 = 0.0;
    MetricsReport metrics;
    bool purified = false;
    std::string model;
    bool selected = false;
};
std::vector<MetricsRow> read_metrics_file(const std::filesystem::path& path);

/// Project-relative artifact paths recorded for each completed step.
std::map<std::string, std::vector<std::string>> recorded_artifacts(const std::filesystem::path& project);

}  // namespace craml
