#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "craml/learning/tfidf.hpp"

namespace craml {

enum class Family { naive_bayes, logistic_regression, sgd_svm, random_forest };

Family parse_family(std::string_view text);  // accepts long names and nb/lr/sgd/rf
std::string_view to_string(Family family);
std::string_view short_name(Family family);

/// Hyper-parameters by name. Random-forest depth 0 means unlimited.
using Params = std::map<std::string, double>;

Params default_params(Family family);
/// Fills unspecified keys from the defaults; unknown keys are an error.
Params resolve_params(Family family, const Params& params);
std::string params_to_string(const Params& params);

struct FitContext {
    std::size_t features = 0;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual Family family() const = 0;
    virtual void fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) = 0;
    virtual std::uint8_t predict(const SparseVec& x) const = 0;
    virtual nlohmann::ordered_json to_json() const = 0;
};

std::unique_ptr<Classifier> make_classifier(Family family, const Params& params);
std::unique_ptr<Classifier> classifier_from_json(Family family, const Params& params, const nlohmann::json& state);

class NaiveBayes final : public Classifier {
public:
    explicit NaiveBayes(double alpha = 1.0) : alpha_(alpha) {}
    Family family() const override { return Family::naive_bayes; }
    void fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) override;
    std::uint8_t predict(const SparseVec& x) const override;
    nlohmann::ordered_json to_json() const override;
    static NaiveBayes from_json(double alpha, const nlohmann::json& j);

private:
    double alpha_;
    double log_prior_[2] = {0, 0};
    std::vector<double> log_prob_[2];
};

/// L2-regularized logistic regression, full-batch accelerated gradient.
class LogisticRegression final : public Classifier {
public:
    explicit LogisticRegression(double c = 1.0, std::size_t iterations = 300) : c_(c), iterations_(iterations) {}
    Family family() const override { return Family::logistic_regression; }
    void fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) override;
    std::uint8_t predict(const SparseVec& x) const override;
    double decision(const SparseVec& x) const;
    nlohmann::ordered_json to_json() const override;
    static LogisticRegression from_json(double c, const nlohmann::json& j);

private:
    double c_;
    std::size_t iterations_;
    std::vector<double> w_;
    double b_ = 0.0;
};

/// Linear SVM trained by Pegasos (hinge loss, step 1/(lambda t)).
class SgdSvm final : public Classifier {
public:
    explicit SgdSvm(double lambda = 1e-4, std::size_t epochs = 20) : lambda_(lambda), epochs_(epochs) {}
    Family family() const override { return Family::sgd_svm; }
    void fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) override;
    std::uint8_t predict(const SparseVec& x) const override;
    double decision(const SparseVec& x) const;
    nlohmann::ordered_json to_json() const override;
    static SgdSvm from_json(double lambda, const nlohmann::json& j);

private:
    double lambda_;
    std::size_t epochs_;
    std::vector<double> w_;
    double b_ = 0.0;
};

}  // namespace craml
