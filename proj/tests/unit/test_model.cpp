#include <gtest/gtest.h>

#include "craml/error.hpp"
#include "craml/learning/forest.hpp"
#include "craml/learning/model.hpp"
#include "craml/util.hpp"
#include "reference.hpp"

#include <random>

using namespace craml;
using craml::testing::TempDir;

namespace {

TrainingSet toy_training(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const std::vector<std::string> filler{"the", "franchisee", "any", "employee", "of", "system", "agree", "term"};
    TrainingSet set;
    set.tags = {"nopoach", "other"};
    set.keywords_hash = "kw";
    for (std::size_t i = 0; i < n; ++i) {
        bool pos = gen() % 3 == 0;
        std::string s;
        for (int w = 0; w < 5; ++w) s += filler[gen() % filler.size()] + " ";
        s += pos ? "shall not hire" : "may hire";
        s += " " + std::to_string(i);
        set.rows.push_back({"d" + std::to_string(i), s, pos ? "shall not hire" : "hire", 1,
                            {static_cast<std::uint8_t>(pos), 0}});
    }
    return set;
}

}  // namespace

TEST(ModelName, EncodesFamilyTagF1AndPurified) {
    auto n = parse_model_name("rf_nopoach_0.97_purified");
    EXPECT_EQ(n.family, Family::random_forest);
    EXPECT_EQ(n.tag, "nopoach");
    EXPECT_DOUBLE_EQ(n.f1, 0.97);
    EXPECT_TRUE(n.purified);
    auto m = parse_model_name("nb_no_poach_0.74.json");
    EXPECT_EQ(m.tag, "no_poach");
    EXPECT_FALSE(m.purified);
    EXPECT_THROW(parse_model_name("rf_0.9"), Error);
    EXPECT_THROW(parse_model_name("rf_x_high"), Error);
    EXPECT_THROW(parse_model_name("zz_x_0.5"), Error);
}

TEST(Model, TrainReportsHeldOutMetrics) {
    auto set = toy_training(300, 1);
    TrainOptions opts;
    opts.seed = 3;
    auto m = train(Family::logistic_regression, set, "nopoach", {}, opts);
    EXPECT_EQ(m.metrics.total(), 60u);
    EXPECT_GT(m.metrics.f1, 0.95);
    EXPECT_EQ(m.file_name(), "lr_nopoach_" + format_fixed(m.metrics.f1, 2) + ".json");
    EXPECT_EQ(m.predict("the franchisee shall not hire"), 1);
    EXPECT_EQ(m.predict("the franchisee may hire"), 0);
}

TEST(Model, DegenerateLabelsAreRejected) {
    auto set = toy_training(50, 1);
    EXPECT_THROW(train(Family::naive_bayes, set, "other", {}, {}), Error);
    EXPECT_THROW(train(Family::naive_bayes, set, "missing", {}, {}), Error);
}

TEST(Model, SaveLoadGivesIdenticalPredictions) {
    TempDir dir;
    auto set = toy_training(200, 2);
    auto probe = toy_training(100, 9);
    for (Family f : {Family::naive_bayes, Family::logistic_regression, Family::sgd_svm, Family::random_forest}) {
        Params p = f == Family::random_forest ? Params{{"trees", 15}} : Params{};
        auto m = train(f, set, "nopoach", p, {});
        auto path = dir / m.file_name();
        save_model(m, path);
        auto back = load_model(path);
        EXPECT_EQ(back.family, f);
        EXPECT_EQ(back.tag, "nopoach");
        EXPECT_EQ(back.keywords_hash, "kw");
        EXPECT_EQ(back.to_json(), m.to_json());
        for (const auto& r : probe.rows) ASSERT_EQ(back.predict(r.chunk), m.predict(r.chunk));
    }
}

TEST(Model, PurifyIsRandomForestOnly) {
    auto set = toy_training(200, 4);
    auto rf = train(Family::random_forest, set, "nopoach", {{"trees", 20}}, {});
    std::vector<std::string> chunks;
    for (const auto& r : set.rows) chunks.push_back(r.chunk);
    auto before = rf.predict(chunks);
    std::size_t size_before = rf.to_json().size();
    std::string warning;
    auto pure = purify(std::move(rf), &warning);
    EXPECT_TRUE(warning.empty());
    EXPECT_TRUE(pure.purified);
    EXPECT_NE(pure.file_name().find("_purified"), std::string::npos);
    EXPECT_EQ(pure.predict(chunks), before);
    EXPECT_LT(pure.to_json().size(), size_before);

    auto nb = purify(train(Family::naive_bayes, set, "nopoach", {}, {}), &warning);
    EXPECT_FALSE(nb.purified);
    EXPECT_FALSE(warning.empty());
}

TEST(Model, TrimConfigTravelsWithTheModel) {
    TempDir dir;
    auto set = toy_training(150, 5);
    TrainOptions opts;
    opts.trim = TrimConfig{2, {"not"}, {}, {"hire"}};
    auto m = train(Family::naive_bayes, set, "nopoach", {}, opts);
    save_model(m, dir / "m.json");
    auto back = load_model(dir / "m.json");
    ASSERT_TRUE(back.trim.has_value());
    EXPECT_EQ(back.trim->trim, 2u);
    EXPECT_EQ(back.predict("a b c shall not hire x y"), m.predict("a b c shall not hire x y"));
}

TEST(GridSearch, PicksBestMeanF1AndIsReproducible) {
    auto set = toy_training(250, 6);
    TrainOptions opts;
    opts.seed = 8;
    auto grid = parse_grid(Family::naive_bayes, "alpha=0.1/1/5");
    auto a = grid_search(Family::naive_bayes, set, "nopoach", grid, opts, 4);
    auto b = grid_search(Family::naive_bayes, set, "nopoach", grid, opts, 4);
    ASSERT_EQ(a.points.size(), 3u);
    EXPECT_EQ(a.to_csv(), b.to_csv());
    for (const auto& p : a.points) {
        EXPECT_EQ(p.fold_f1.size(), 4u);
        EXPECT_LE(p.mean_f1, a.points[a.best].mean_f1);
    }
    EXPECT_NE(a.to_csv().find("fold4_f1"), std::string::npos);
}

TEST(GridSearch, TiesGoToTheSimplerModel) {
    auto set = toy_training(200, 7);
    auto grid = parse_grid(Family::random_forest, "trees=5/10,depth=none/4");
    auto result = grid_search(Family::random_forest, set, "nopoach", grid, {}, 3);
    for (const auto& p : result.points) {
        if (std::abs(p.mean_f1 - result.points[result.best].mean_f1) <= 1e-12) {
            EXPECT_GE(model_complexity(Family::random_forest, p.params),
                      model_complexity(Family::random_forest, result.best_params()));
        }
    }
}

TEST(Registry, RoundTripsRelativePaths) {
    TempDir dir;
    ModelRegistry reg;
    reg.set("nopoach", dir / "models/rf_nopoach_0.97.json");
    reg.save(dir / "models/registry.json");
    std::string text = read_file(dir / "models/registry.json");
    EXPECT_NE(text.find("\"rf_nopoach_0.97.json\""), std::string::npos);
    auto back = ModelRegistry::load(dir / "models/registry.json");
    EXPECT_TRUE(back.contains("nopoach"));
    EXPECT_EQ(back.path("nopoach"), (dir / "models/rf_nopoach_0.97.json").lexically_normal());
    EXPECT_THROW(back.path("other"), Error);
}
