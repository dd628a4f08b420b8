#include <gtest/gtest.h>

#include "craml/error.hpp"
#include "craml/learning/classifier.hpp"
#include "craml/learning/forest.hpp"
#include "craml/learning/metrics.hpp"
#include "craml/learning/tfidf.hpp"
#include "craml/learning/trim.hpp"
#include "craml/learning/model.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace craml;

namespace {

struct Toy {
    std::vector<std::string> chunks;
    std::vector<std::uint8_t> labels;
};

// tag = presence of token "x"
Toy separable(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const std::vector<std::string> filler{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
    Toy t;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        for (int w = 0; w < 6; ++w) s += filler[gen() % filler.size()] + " ";
        bool pos = i % 2 == 0;
        if (pos) s += "x";
        t.chunks.push_back(s);
        t.labels.push_back(pos);
    }
    return t;
}

}  // namespace

TEST(Metrics, F1FromPrecisionAndRecall) {
    EXPECT_NEAR(f1_score(0.60, 0.95), 0.735, 0.0005);
    EXPECT_NEAR(f1_score(0.911, 0.997), 0.952, 0.001);
    EXPECT_EQ(f1_score(0, 0), 0.0);
}

TEST(Metrics, RecordLevelConfusionFixture) {
    auto m = MetricsReport::from_counts(6856, 672, 22, 5372);
    EXPECT_EQ(m.total(), 12922u);
    EXPECT_NEAR(m.precision, 0.911, 0.001);
    EXPECT_NEAR(m.recall, 0.997, 0.001);
    EXPECT_NEAR(m.f1, 0.952, 0.001);
    EXPECT_NEAR(m.accuracy, 0.946, 0.001);
}

TEST(Metrics, PerfectAndDisjointPredictions) {
    std::vector<std::uint8_t> y{1, 0, 1, 1, 0};
    auto perfect = evaluate(y, y);
    EXPECT_EQ(perfect.accuracy, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);
    std::vector<std::uint8_t> flipped{0, 1, 0, 0, 1};
    auto none = evaluate(flipped, y);
    EXPECT_EQ(none.precision, 0.0);
    EXPECT_EQ(none.recall, 0.0);
    EXPECT_EQ(none.f1, 0.0);
}

TEST(Metrics, HarmonicMeanIdentityHoldsForRandomCounts) {
    std::mt19937 gen(2);
    for (int c = 0; c < 500; ++c) {
        std::size_t tp = gen() % 50, fp = gen() % 50, fn = gen() % 50, tn = gen() % 50;
        auto m = MetricsReport::from_counts(tp, fp, fn, tn);
        double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
        double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
        double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        EXPECT_NEAR(m.f1, f, 1e-12);
        auto back = MetricsReport::from_json(m.to_json());
        EXPECT_EQ(back.tp, tp);
        EXPECT_NEAR(back.f1, m.f1, 1e-12);
    }
}

TEST(Tfidf, SmoothedIdfAndUnitRows) {
    std::vector<std::string> docs{"a b", "a c", "a a d"};
    auto v = Vectorizer::fit(docs);
    EXPECT_EQ(v.terms(), (std::vector<std::string>{"a", "b", "c", "d"}));
    EXPECT_NEAR(v.idf()[0], std::log(4.0 / 4.0) + 1, 1e-12);
    EXPECT_NEAR(v.idf()[1], std::log(4.0 / 2.0) + 1, 1e-12);
    auto row = v.transform("a a d");
    ASSERT_EQ(row.nnz(), 2u);
    double a = 2 * v.idf()[0], d = v.idf()[3];
    double norm = std::sqrt(a * a + d * d);
    EXPECT_NEAR(row.at(0), a / norm, 1e-12);
    EXPECT_NEAR(row.at(3), d / norm, 1e-12);
    EXPECT_EQ(row.at(1), 0.0);
    EXPECT_EQ(v.transform("unknown words").nnz(), 0u);
}

TEST(Tfidf, JsonRoundTrip) {
    std::vector<std::string> docs{"shall not hire", "may hire", "nothing"};
    auto v = Vectorizer::fit(docs);
    auto back = Vectorizer::from_json(v.to_json());
    auto a = v.transform("shall hire nothing");
    auto b = back.transform("shall hire nothing");
    EXPECT_EQ(a.index, b.index);
    EXPECT_EQ(a.value, b.value);
}

class FamilyTest : public ::testing::TestWithParam<Family> {};

TEST_P(FamilyTest, SeparableToyReachesPerfectF1) {
    auto train = separable(200, 1);
    auto test = separable(100, 2);
    auto vec = Vectorizer::fit(train.chunks);
    auto clf = make_classifier(GetParam(), default_params(GetParam()));
    clf->fit(vec.transform(train.chunks), train.labels, {vec.size(), 3, 1});
    std::vector<std::uint8_t> pred;
    for (const auto& c : test.chunks) pred.push_back(clf->predict(vec.transform(c)));
    EXPECT_EQ(evaluate(pred, test.labels).f1, 1.0);
}

TEST_P(FamilyTest, JsonStateReproducesPredictions) {
    auto train = separable(120, 4);
    auto vec = Vectorizer::fit(train.chunks);
    auto params = default_params(GetParam());
    auto clf = make_classifier(GetParam(), params);
    clf->fit(vec.transform(train.chunks), train.labels, {vec.size(), 5, 1});
    nlohmann::json state = nlohmann::json::parse(clf->to_json().dump());
    auto back = classifier_from_json(GetParam(), params, state);
    auto probe = separable(60, 9);
    for (const auto& c : probe.chunks) EXPECT_EQ(clf->predict(vec.transform(c)), back->predict(vec.transform(c)));
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, FamilyTest,
                         ::testing::Values(Family::naive_bayes, Family::logistic_regression, Family::sgd_svm,
                                           Family::random_forest),
                         [](const auto& info) { return std::string(short_name(info.param)); });

TEST(Families, NamesAndParams) {
    EXPECT_EQ(parse_family("rf"), Family::random_forest);
    EXPECT_EQ(parse_family("naive-bayes"), Family::naive_bayes);
    EXPECT_THROW(parse_family("svm2"), Error);
    auto p = resolve_params(Family::random_forest, {{"trees", 10}});
    EXPECT_EQ(p.at("trees"), 10);
    EXPECT_EQ(p.at("depth"), 0);
    EXPECT_THROW(resolve_params(Family::naive_bayes, {{"depth", 3}}), Error);
}

TEST(Grid, ParsesCartesianProduct) {
    auto g = parse_grid(Family::random_forest, "trees=10/20,depth=4/none");
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g[1].at("depth"), 0.0);
    EXPECT_EQ(g[3].at("trees"), 20.0);
    EXPECT_EQ(parse_grid(Family::naive_bayes, "default").size(), default_grid(Family::naive_bayes).size());
    EXPECT_THROW(parse_grid(Family::naive_bayes, "alpha"), Error);
    EXPECT_THROW(parse_grid(Family::naive_bayes, "alpha=x"), Error);
    EXPECT_LT(model_complexity(Family::random_forest, {{"trees", 10}, {"depth", 4}}),
              model_complexity(Family::random_forest, {{"trees", 10}, {"depth", 0}}));
}

TEST(Split, StratifiedSplitIsDisjointAndProportional) {
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 1000; ++i) y.push_back(i % 5 == 0);
    auto [tr, te] = stratified_split(y, 0.2, 7);
    EXPECT_EQ(tr.size() + te.size(), 1000u);
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (auto i : te) EXPECT_FALSE(all.count(i));
    std::size_t pos = 0;
    for (auto i : te) pos += y[i];
    EXPECT_EQ(pos, 40u);
    EXPECT_EQ(stratified_split(y, 0.2, 7), stratified_split(y, 0.2, 7));
}

TEST(Split, FoldsAreBalanced) {
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 103; ++i) y.push_back(i % 3 == 0);
    auto folds = stratified_folds(y, 5, 1);
    std::vector<std::size_t> size(5), pos(5);
    for (std::size_t i = 0; i < y.size(); ++i) {
        ++size[folds[i]];
        pos[folds[i]] += y[i];
    }
    for (std::size_t f = 0; f < 5; ++f) {
        EXPECT_GE(size[f], 20u);
        EXPECT_LE(size[f], 21u);
        EXPECT_GE(pos[f], 6u);
        EXPECT_LE(pos[f], 7u);
    }
    EXPECT_THROW(stratified_folds(y, 1, 1), Error);
}

TEST(Trim, KeepsQualifiersKeepsAndWindow) {
    TrimConfig cfg;
    cfg.trim = 1;
    cfg.keywords = {"hire"};
    cfg.qualifiers = {"not"};
    cfg.keeps = {"employee"};
    EXPECT_EQ(trim_chunk("a b shall not hire any employee c d", cfg), std::optional<std::string>("not employee not hire any"));
    EXPECT_EQ(trim_chunk("nothing here", cfg), std::nullopt);
    auto back = TrimConfig::from_json(cfg.to_json());
    EXPECT_EQ(back.trim, 1u);
    EXPECT_EQ(back.qualifiers, cfg.qualifiers);
}

TEST(Trim, PreprocessWarnsOnRowsWithoutKeyword) {
    TrainingSet set;
    set.tags = {"t"};
    set.rows.push_back({"d", "a b c hire d e f", "hire", 1, {0}});
    set.rows.push_back({"d", "no keyword", "x", 1, {1}});
    TrimConfig cfg;
    cfg.trim = 1;
    cfg.keywords = {"hire"};
    auto out = trim_preprocess(set, cfg);
    EXPECT_EQ(out.rows[0].chunk, "c hire d");
    EXPECT_EQ(out.rows[1].chunk, "no keyword");
    EXPECT_FALSE(out.warnings.empty());
}
