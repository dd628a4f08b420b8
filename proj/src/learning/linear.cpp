#include "craml/error.hpp"
#include "craml/learning/classifier.hpp"
#include "craml/learning/forest.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace craml {

Family parse_family(std::string_view text) {
    if (text == "naive-bayes" || text == "nb") return Family::naive_bayes;
    if (text == "logistic-regression" || text == "lr") return Family::logistic_regression;
    if (text == "sgd-svm" || text == "sgd") return Family::sgd_svm;
    if (text == "random-forest" || text == "rf") return Family::random_forest;
    fail_usage("unknown model family '" + std::string(text) + "' (expected nb, lr, sgd or rf)");
}

std::string_view to_string(Family family) {
    switch (family) {
        case Family::naive_bayes: return "naive-bayes";
        case Family::logistic_regression: return "logistic-regression";
        case Family::sgd_svm: return "sgd-svm";
        case Family::random_forest: return "random-forest";
    }
    return "";
}

std::string_view short_name(Family family) {
    switch (family) {
        case Family::naive_bayes: return "nb";
        case Family::logistic_regression: return "lr";
        case Family::sgd_svm: return "sgd";
        case Family::random_forest: return "rf";
    }
    return "";
}

Params default_params(Family family) {
    switch (family) {
        case Family::naive_bayes: return {{"alpha", 1.0}};
        case Family::logistic_regression: return {{"C", 1.0}};
        case Family::sgd_svm: return {{"lambda", 1e-4}};
        case Family::random_forest: return {{"depth", 0.0}, {"trees", 100.0}};
    }
    return {};
}

Params resolve_params(Family family, const Params& params) {
    Params out = default_params(family);
    for (const auto& [k, v] : params) {
        if (!out.count(k)) fail_usage("parameter '" + k + "' does not apply to " + std::string(to_string(family)));
        if (!std::isfinite(v) || v < 0) fail_usage("parameter '" + k + "' must be a non-negative number");
        out[k] = v;
    }
    if (family == Family::random_forest && out["trees"] < 1) fail_usage("trees must be >= 1");
    if (family != Family::random_forest && out.begin()->second <= 0) {
        fail_usage("parameter '" + out.begin()->first + "' must be positive");
    }
    return out;
}

std::string params_to_string(const Params& params) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : params) {
        std::ostringstream s;
        s << k << '=';
        if (k == "depth" && v == 0) s << "none";
        else s << v;
        parts.push_back(s.str());
    }
    return join(parts, " ");
}

std::unique_ptr<Classifier> make_classifier(Family family, const Params& raw) {
    Params p = resolve_params(family, raw);
    switch (family) {
        case Family::naive_bayes: return std::make_unique<NaiveBayes>(p.at("alpha"));
        case Family::logistic_regression: return std::make_unique<LogisticRegression>(p.at("C"));
        case Family::sgd_svm: return std::make_unique<SgdSvm>(p.at("lambda"));
        case Family::random_forest:
            return std::make_unique<RandomForest>(static_cast<std::size_t>(p.at("trees")),
                                                  static_cast<std::size_t>(p.at("depth")));
    }
    return nullptr;
}

std::unique_ptr<Classifier> classifier_from_json(Family family, const Params& raw, const nlohmann::json& state) {
    Params p = resolve_params(family, raw);
    switch (family) {
        case Family::naive_bayes: return std::make_unique<NaiveBayes>(NaiveBayes::from_json(p.at("alpha"), state));
        case Family::logistic_regression:
            return std::make_unique<LogisticRegression>(LogisticRegression::from_json(p.at("C"), state));
        case Family::sgd_svm: return std::make_unique<SgdSvm>(SgdSvm::from_json(p.at("lambda"), state));
        case Family::random_forest:
            return std::make_unique<RandomForest>(RandomForest::from_json(
                static_cast<std::size_t>(p.at("trees")), static_cast<std::size_t>(p.at("depth")), state));
    }
    return nullptr;
}

namespace {

double dot(const std::vector<double>& w, const SparseVec& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.nnz(); ++i) {
        if (x.index[i] < w.size()) s += w[x.index[i]] * x.value[i];
    }
    return s;
}

void check_fit_input(std::span<const SparseVec> x, std::span<const std::uint8_t> y) {
    if (x.size() != y.size()) fail_data("fit: rows and labels differ in length");
    if (x.empty()) fail_data("fit: no training rows");
}

}  // namespace

// ---- naive bayes ----------------------------------------------------------

void NaiveBayes::fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) {
    check_fit_input(x, y);
    const std::size_t m = ctx.features;
    std::vector<double> count[2] = {std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
    double rows[2] = {0, 0};
    for (std::size_t r = 0; r < x.size(); ++r) {
        int c = y[r] ? 1 : 0;
        rows[c] += 1;
        for (std::size_t i = 0; i < x[r].nnz(); ++i) count[c][x[r].index[i]] += x[r].value[i];
    }
    for (int c = 0; c < 2; ++c) {
        double total = std::accumulate(count[c].begin(), count[c].end(), 0.0) + alpha_ * static_cast<double>(m);
        log_prob_[c].resize(m);
        for (std::size_t j = 0; j < m; ++j) log_prob_[c][j] = std::log((count[c][j] + alpha_) / total);
        // an absent class never wins
        log_prior_[c] = rows[c] > 0 ? std::log(rows[c] / static_cast<double>(x.size())) : -1e300;
    }
}

std::uint8_t NaiveBayes::predict(const SparseVec& x) const {
    double s0 = log_prior_[0] + dot(log_prob_[0], x);
    double s1 = log_prior_[1] + dot(log_prob_[1], x);
    return s1 > s0 ? 1 : 0;
}

nlohmann::ordered_json NaiveBayes::to_json() const {
    nlohmann::ordered_json j;
    j["log_prior"] = {log_prior_[0], log_prior_[1]};
    j["log_prob"] = {log_prob_[0], log_prob_[1]};
    return j;
}

NaiveBayes NaiveBayes::from_json(double alpha, const nlohmann::json& j) {
    NaiveBayes nb(alpha);
    for (int c = 0; c < 2; ++c) {
        nb.log_prior_[c] = j.at("log_prior").at(c).get<double>();
        nb.log_prob_[c] = j.at("log_prob").at(c).get<std::vector<double>>();
    }
    return nb;
}

// ---- logistic regression --------------------------------------------------

void LogisticRegression::fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) {
    check_fit_input(x, y);
    const std::size_t m = ctx.features;
    const double n = static_cast<double>(x.size());
    const double lambda = 1.0 / (c_ * n);
    double max_norm = 0;
    for (const auto& r : x) {
        double s = 0;
        for (double v : r.value) s += v * v;
        max_norm = std::max(max_norm, s);
    }
    const double step = 1.0 / (0.25 * (max_norm + 1.0) + lambda);

    std::vector<double> w(m, 0.0), w_prev(m, 0.0), v(m, 0.0), grad(m, 0.0);
    double b = 0, b_prev = 0, vb = 0;
    for (std::size_t it = 1; it <= iterations_; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0;
        for (std::size_t r = 0; r < x.size(); ++r) {
            double z = dot(v, x[r]) + vb;
            double p = 1.0 / (1.0 + std::exp(-z));
            double e = (p - (y[r] ? 1.0 : 0.0)) / n;
            for (std::size_t i = 0; i < x[r].nnz(); ++i) grad[x[r].index[i]] += e * x[r].value[i];
            gb += e;
        }
        w_prev.swap(w);
        b_prev = b;
        for (std::size_t j = 0; j < m; ++j) w[j] = v[j] - step * (grad[j] + lambda * v[j]);
        b = vb - step * gb;
        double mom = static_cast<double>(it - 1) / static_cast<double>(it + 2);
        for (std::size_t j = 0; j < m; ++j) v[j] = w[j] + mom * (w[j] - w_prev[j]);
        vb = b + mom * (b - b_prev);
    }
    w_ = std::move(w);
    b_ = b;
}

double LogisticRegression::decision(const SparseVec& x) const { return dot(w_, x) + b_; }

std::uint8_t LogisticRegression::predict(const SparseVec& x) const { return decision(x) > 0 ? 1 : 0; }

nlohmann::ordered_json LogisticRegression::to_json() const {
    nlohmann::ordered_json j;
    j["iterations"] = iterations_;
    j["bias"] = b_;
    j["weights"] = w_;
    return j;
}

LogisticRegression LogisticRegression::from_json(double c, const nlohmann::json& j) {
    LogisticRegression lr(c, j.at("iterations").get<std::size_t>());
    lr.b_ = j.at("bias").get<double>();
    lr.w_ = j.at("weights").get<std::vector<double>>();
    return lr;
}

// ---- pegasos svm ----------------------------------------------------------

void SgdSvm::fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) {
    check_fit_input(x, y);
    const std::size_t m = ctx.features;
    // w = scale * v; the bias is an extra always-on feature
    std::vector<double> v(m, 0.0);
    double vb = 0;
    double scale = 1.0;
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(ctx.seed);
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < epochs_; ++epoch) {
        rng.shuffle(order);
        for (std::size_t r : order) {
            ++t;
            const double eta = 1.0 / (lambda_ * static_cast<double>(t));
            const double label = y[r] ? 1.0 : -1.0;
            const double margin = label * scale * (dot(v, x[r]) + vb);
            const double shrink = 1.0 - eta * lambda_;
            if (shrink <= 0) {
                std::fill(v.begin(), v.end(), 0.0);
                vb = 0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if (margin < 1.0) {
                const double a = eta * label / scale;
                for (std::size_t i = 0; i < x[r].nnz(); ++i) v[x[r].index[i]] += a * x[r].value[i];
                vb += a;
            }
            if (scale < 1e-9) {
                for (double& e : v) e *= scale;
                vb *= scale;
                scale = 1.0;
            }
        }
    }
    w_.resize(m);
    for (std::size_t j = 0; j < m; ++j) w_[j] = v[j] * scale;
    b_ = vb * scale;
}

double SgdSvm::decision(const SparseVec& x) const { return dot(w_, x) + b_; }

std::uint8_t SgdSvm::predict(const SparseVec& x) const { return decision(x) > 0 ? 1 : 0; }

nlohmann::ordered_json SgdSvm::to_json() const {
    nlohmann::ordered_json j;
    j["epochs"] = epochs_;
    j["bias"] = b_;
    j["weights"] = w_;
    return j;
}

SgdSvm SgdSvm::from_json(double lambda, const nlohmann::json& j) {
    SgdSvm s(lambda, j.at("epochs").get<std::size_t>());
    s.b_ = j.at("bias").get<double>();
    s.w_ = j.at("weights").get<std::vector<double>>();
    return s;
}

}  // namespace craml
