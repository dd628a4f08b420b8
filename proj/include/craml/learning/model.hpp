#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craml/extrapolation.hpp"
#include "craml/learning/classifier.hpp"
#include "craml/learning/metrics.hpp"
#include "craml/learning/tfidf.hpp"
#include "craml/learning/trim.hpp"

namespace craml {

inline constexpr int kModelFormatVersion = 1;

class ClassifierModel {
public:
    Family family = Family::naive_bayes;
    std::string tag;
    Params params;
    Vectorizer vectorizer;
    std::unique_ptr<Classifier> classifier;
    MetricsReport metrics;
    bool purified = false;
    std::string keywords_hash;
    std::string training_hash;
    std::uint64_t seed = 0;
    std::optional<TrimConfig> trim;

    std::uint8_t predict(std::string_view chunk) const;
    std::vector<std::uint8_t> predict(std::span<const std::string> chunks) const;

    std::string to_json() const;
    static ClassifierModel from_json(std::string_view text);

    /// `<family>_<tag>_<f1>[_purified].json`
    std::string file_name() const;
};

struct ModelName {
    Family family;
    std::string tag;
    double f1 = 0.0;
    bool purified = false;
};
ModelName parse_model_name(std::string_view file_name);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

struct TrainOptions {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    double test_fraction = 0.2;
    std::optional<TrimConfig> trim;
};

/// Labels and chunks for one tag, after optional trimming.
struct TagData {
    std::vector<std::string> chunks;
    std::vector<std::uint8_t> labels;
};
TagData tag_data(const TrainingSet& training, std::string_view tag, const std::optional<TrimConfig>& trim);

/// Seeded stratified split; returns (train indices, test indices), each sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::uint8_t> labels,
                                                                               double test_fraction,
                                                                               std::uint64_t seed);
/// Fold id per row for stratified k-fold.
std::vector<std::size_t> stratified_folds(std::span<const std::uint8_t> labels, std::size_t k, std::uint64_t seed);

/// Fits on the stratified training split; metrics come from the held-out part.
ClassifierModel train(Family family, const TrainingSet& training, std::string_view tag, const Params& params,
                      const TrainOptions& options);

struct GridPoint {
    Params params;
    double mean_f1 = 0.0;
    std::vector<double> fold_f1;
};

struct GridResult {
    Family family;
    std::vector<GridPoint> points;
    std::size_t best = 0;

    const Params& best_params() const { return points.at(best).params; }
    std::string to_csv() const;
};

std::vector<Params> default_grid(Family family);
/// Parses "key=v1/v2,key2=v3" or "default".
std::vector<Params> parse_grid(Family family, std::string_view spec);

/// Lower is simpler; breaks F1 ties.
double model_complexity(Family family, const Params& params);

/// k-fold stratified CV over the training split of `train` (the held-out
/// part is never seen).
GridResult grid_search(Family family, const TrainingSet& training, std::string_view tag,
                       std::span<const Params> grid, const TrainOptions& options, std::size_t folds = 5);

/// Random-forest models only; others are returned unchanged with a warning.
ClassifierModel purify(ClassifierModel model, std::string* warning = nullptr);

/// tag -> model path (stored relative to the registry file).
class ModelRegistry {
public:
    void set(const std::string& tag, const std::filesystem::path& model_path);
    const std::filesystem::path& path(std::string_view tag) const;
    bool contains(std::string_view tag) const;
    std::vector<std::string> tags() const;

    void save(const std::filesystem::path& file) const;
    static ModelRegistry load(const std::filesystem::path& file);

    /// Loads (and caches nothing); errors when the tag is absent.
    ClassifierModel load_model(std::string_view tag) const;

private:
    std::map<std::string, std::filesystem::path, std::less<>> paths_;  // absolute
};

}  // namespace craml
