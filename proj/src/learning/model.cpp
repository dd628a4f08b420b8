#include "craml/learning/model.hpp"

#include "craml/error.hpp"
#include "craml/learning/forest.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace craml {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint8_t ClassifierModel::predict(std::string_view chunk) const {
    if (!classifier) fail_state("model has no fitted classifier");
    if (trim) {
        if (auto t = trim_chunk(chunk, *trim)) return classifier->predict(vectorizer.transform(*t));
    }
    return classifier->predict(vectorizer.transform(chunk));
}

std::vector<std::uint8_t> ClassifierModel::predict(std::span<const std::string> chunks) const {
    std::vector<std::uint8_t> out;
    out.reserve(chunks.size());
    for (const auto& c : chunks) out.push_back(predict(c));
    return out;
}

std::string ClassifierModel::to_json() const {
    if (!classifier) fail_state("model has no fitted classifier");
    ordered_json j;
    j["format"] = "craml-model";
    j["version"] = kModelFormatVersion;
    j["family"] = to_string(family);
    j["tag"] = tag;
    j["params"] = params;
    j["purified"] = purified;
    j["seed"] = std::to_string(seed);
    j["keywords_hash"] = keywords_hash;
    j["training_hash"] = training_hash;
    j["metrics"] = metrics.to_json();
    j["trim"] = trim ? trim->to_json() : ordered_json(nullptr);
    j["vectorizer"] = vectorizer.to_json();
    j["state"] = classifier->to_json();
    return j.dump();
}

ClassifierModel ClassifierModel::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail_data(std::string("model: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "craml-model") fail_data("model: not a craml model file");
    int version = j.value("version", -1);
    if (version != kModelFormatVersion) {
        fail_data("model: format version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kModelFormatVersion) + ")");
    }
    try {
        ClassifierModel m;
        m.family = parse_family(j.at("family").get<std::string>());
        m.tag = j.at("tag").get<std::string>();
        m.params = j.at("params").get<Params>();
        m.purified = j.at("purified").get<bool>();
        m.seed = std::stoull(j.at("seed").get<std::string>());
        m.keywords_hash = j.at("keywords_hash").get<std::string>();
        m.training_hash = j.at("training_hash").get<std::string>();
        m.metrics = MetricsReport::from_json(j.at("metrics"));
        if (!j.at("trim").is_null()) m.trim = TrimConfig::from_json(j.at("trim"));
        m.vectorizer = Vectorizer::from_json(j.at("vectorizer"));
        m.classifier = classifier_from_json(m.family, m.params, j.at("state"));
        return m;
    } catch (const json::exception& e) {
        fail_data(std::string("model: malformed field: ") + e.what());
    }
}

std::string ClassifierModel::file_name() const {
    std::string name = std::string(short_name(family)) + "_" + tag + "_" + format_fixed(metrics.f1, 2);
    if (purified) name += "_purified";
    return name + ".json";
}

ModelName parse_model_name(std::string_view file_name) {
    std::string stem(file_name);
    if (stem.size() > 5 && stem.ends_with(".json")) stem.resize(stem.size() - 5);
    auto parts = split(stem, '_');
    ModelName out{};
    if (!parts.empty() && parts.back() == "purified") {
        out.purified = true;
        parts.pop_back();
    }
    if (parts.size() < 3) fail_data("model name '" + std::string(file_name) + "' is not <family>_<tag>_<f1>");
    out.family = parse_family(parts.front());
    const std::string& f1 = parts.back();
    char* end = nullptr;
    out.f1 = std::strtod(f1.c_str(), &end);
    if (f1.empty() || *end != '\0' || out.f1 < 0 || out.f1 > 1) {
        fail_data("model name '" + std::string(file_name) + "' has an invalid F1 '" + f1 + "'");
    }
    out.tag = join(std::span<const std::string>(parts).subspan(1, parts.size() - 2), "_");
    if (out.tag.empty()) fail_data("model name '" + std::string(file_name) + "' has no tag");
    return out;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) { write_file(path, model.to_json()); }

ClassifierModel load_model(const std::filesystem::path& path) {
    try {
        return ClassifierModel::from_json(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::data) fail_data(path.string() + ": " + e.what());
        throw;
    }
}

TagData tag_data(const TrainingSet& training, std::string_view tag, const std::optional<TrimConfig>& trim) {
    std::size_t t = training.require_tag(tag);
    TagData d;
    d.chunks.reserve(training.rows.size());
    for (const auto& row : training.rows) {
        std::optional<std::string> trimmed;
        if (trim) trimmed = trim_chunk(row.chunk, *trim);
        d.chunks.push_back(trimmed ? *trimmed : row.chunk);
        d.labels.push_back(row.values[t] ? 1 : 0);
    }
    return d;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::uint8_t> labels,
                                                                               double test_fraction,
                                                                               std::uint64_t seed) {
    if (test_fraction < 0 || test_fraction >= 1) fail_usage("test fraction must be in [0,1)");
    std::vector<std::size_t> train, test;
    for (std::uint8_t cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if ((labels[i] ? 1 : 0) == cls) idx.push_back(i);
        }
        Rng rng(derive_seed(seed, cls));
        rng.shuffle(idx);
        auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * test_fraction));
        if (n_test >= idx.size() && !idx.empty()) n_test = idx.size() - 1;
        test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

std::vector<std::size_t> stratified_folds(std::span<const std::uint8_t> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail_usage("cross-validation needs at least 2 folds");
    std::vector<std::size_t> fold(labels.size(), 0);
    std::size_t next = 0;
    for (std::uint8_t cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if ((labels[i] ? 1 : 0) == cls) idx.push_back(i);
        }
        Rng rng(derive_seed(seed, cls));
        rng.shuffle(idx);
        // continue round-robin across classes so fold sizes stay balanced
        for (auto i : idx) fold[i] = next++ % k;
    }
    return fold;
}

namespace {

void require_both_classes(std::span<const std::uint8_t> labels, std::string_view tag) {
    bool pos = std::any_of(labels.begin(), labels.end(), [](auto v) { return v != 0; });
    bool neg = std::any_of(labels.begin(), labels.end(), [](auto v) { return v == 0; });
    if (!pos || !neg) fail_data("degenerate labels: tag '" + std::string(tag) + "' has only one class");
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

std::string training_hash(const TagData& d) {
    std::uint64_t h = fnv1a64("training");
    for (std::size_t i = 0; i < d.chunks.size(); ++i) {
        h = fnv1a64(d.chunks[i], h);
        h = fnv1a64(d.labels[i] ? "\x01" : "\x00", h);
    }
    return hex64(h);
}

}  // namespace

ClassifierModel train(Family family, const TrainingSet& training, std::string_view tag, const Params& params,
                      const TrainOptions& options) {
    TagData data = tag_data(training, tag, options.trim);
    require_both_classes(data.labels, tag);
    auto [tr, te] = stratified_split(data.labels, options.test_fraction, options.seed);

    ClassifierModel m;
    m.family = family;
    m.tag = std::string(tag);
    m.params = resolve_params(family, params);
    m.keywords_hash = training.keywords_hash;
    m.training_hash = training_hash(data);
    m.seed = options.seed;
    m.trim = options.trim;

    auto train_chunks = pick(data.chunks, tr);
    auto train_labels = pick(data.labels, tr);
    m.vectorizer = Vectorizer::fit(train_chunks);
    auto x = m.vectorizer.transform(train_chunks);
    m.classifier = make_classifier(family, m.params);
    m.classifier->fit(x, train_labels, {m.vectorizer.size(), derive_seed(options.seed, 1), options.jobs});

    std::vector<std::uint8_t> pred, truth;
    for (auto i : te) {
        pred.push_back(m.classifier->predict(m.vectorizer.transform(data.chunks[i])));
        truth.push_back(data.labels[i]);
    }
    m.metrics = evaluate(pred, truth);
    return m;
}

std::vector<Params> default_grid(Family family) {
    switch (family) {
        case Family::naive_bayes: return {{{"alpha", 0.1}}, {{"alpha", 0.5}}, {{"alpha", 1.0}}};
        case Family::logistic_regression: return {{{"C", 0.1}}, {{"C", 1.0}}, {{"C", 10.0}}, {{"C", 100.0}}};
        case Family::sgd_svm: return {{{"lambda", 1e-5}}, {{"lambda", 1e-4}}, {{"lambda", 1e-3}}};
        case Family::random_forest: {
            std::vector<Params> g;
            for (double trees : {50.0, 100.0, 200.0}) {
                for (double depth : {8.0, 16.0, 0.0}) g.push_back({{"trees", trees}, {"depth", depth}});
            }
            return g;
        }
    }
    return {};
}

std::vector<Params> parse_grid(Family family, std::string_view spec) {
    spec = trim(spec);
    if (spec.empty() || spec == "default") return default_grid(family);
    std::vector<Params> grid{Params{}};
    for (const auto& axis : split(spec, ',')) {
        auto eq = axis.find('=');
        if (eq == std::string::npos) fail_usage("grid axis '" + axis + "' must look like key=v1/v2");
        std::string key(trim(std::string_view(axis).substr(0, eq)));
        std::vector<double> values;
        for (const auto& v : split(std::string_view(axis).substr(eq + 1), '/')) {
            auto t = trim(v);
            if (t == "none") {
                values.push_back(0.0);
                continue;
            }
            char* end = nullptr;
            std::string s(t);
            double d = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0') fail_usage("grid value '" + s + "' is not a number");
            values.push_back(d);
        }
        std::vector<Params> next;
        for (const auto& p : grid) {
            for (double v : values) {
                Params q = p;
                q[key] = v;
                next.push_back(q);
            }
        }
        grid = std::move(next);
    }
    for (auto& p : grid) p = resolve_params(family, p);
    return grid;
}

double model_complexity(Family family, const Params& params) {
    Params p = resolve_params(family, params);
    switch (family) {
        case Family::naive_bayes: return 1.0 / p.at("alpha");
        case Family::logistic_regression: return p.at("C");
        case Family::sgd_svm: return 1.0 / p.at("lambda");
        case Family::random_forest: {
            double depth = p.at("depth") == 0 ? 1e6 : p.at("depth");
            return p.at("trees") * depth;
        }
    }
    return 0.0;
}

GridResult grid_search(Family family, const TrainingSet& training, std::string_view tag,
                       std::span<const Params> grid, const TrainOptions& options, std::size_t folds) {
    if (grid.empty()) fail_usage("grid is empty");
    TagData data = tag_data(training, tag, options.trim);
    require_both_classes(data.labels, tag);
    auto tr = stratified_split(data.labels, options.test_fraction, options.seed).first;
    auto chunks = pick(data.chunks, tr);
    auto labels = pick(data.labels, tr);
    auto fold_of = stratified_folds(labels, folds, derive_seed(options.seed, 2));

    struct Fold {
        Vectorizer vec;
        std::vector<SparseVec> x_train, x_test;
        std::vector<std::uint8_t> y_train, y_test;
    };
    std::vector<Fold> fs(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::string> train_chunks;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (fold_of[i] != f) {
                train_chunks.push_back(chunks[i]);
                fs[f].y_train.push_back(labels[i]);
            }
        }
        fs[f].vec = Vectorizer::fit(train_chunks);
        fs[f].x_train = fs[f].vec.transform(train_chunks);
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (fold_of[i] == f) {
                fs[f].x_test.push_back(fs[f].vec.transform(chunks[i]));
                fs[f].y_test.push_back(labels[i]);
            }
        }
    }

    GridResult result;
    result.family = family;
    for (const auto& p : grid) result.points.push_back({resolve_params(family, p), 0.0, std::vector<double>(folds)});
    parallel_for(grid.size() * folds, options.jobs, [&](std::size_t task) {
        std::size_t g = task / folds;
        std::size_t f = task % folds;
        const Fold& fold = fs[f];
        auto clf = make_classifier(family, result.points[g].params);
        clf->fit(fold.x_train, fold.y_train, {fold.vec.size(), derive_seed(derive_seed(options.seed, 3), task), 1});
        std::vector<std::uint8_t> pred;
        for (const auto& x : fold.x_test) pred.push_back(clf->predict(x));
        result.points[g].fold_f1[f] = evaluate(pred, fold.y_test).f1;
    });
    for (auto& pt : result.points) {
        double s = 0;
        for (double v : pt.fold_f1) s += v;
        pt.mean_f1 = s / static_cast<double>(folds);
    }
    for (std::size_t g = 1; g < result.points.size(); ++g) {
        const auto& a = result.points[g];
        const auto& b = result.points[result.best];
        if (a.mean_f1 > b.mean_f1 + 1e-12 ||
            (std::abs(a.mean_f1 - b.mean_f1) <= 1e-12 &&
             model_complexity(family, a.params) < model_complexity(family, b.params))) {
            result.best = g;
        }
    }
    return result;
}

std::string GridResult::to_csv() const {
    std::ostringstream out;
    out << "family,params,mean_f1";
    std::size_t folds = points.empty() ? 0 : points[0].fold_f1.size();
    for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f + 1 << "_f1";
    out << ",best\n";
    for (std::size_t g = 0; g < points.size(); ++g) {
        out << to_string(family) << ',' << params_to_string(points[g].params) << ','
            << format_fixed(points[g].mean_f1, 6);
        for (double v : points[g].fold_f1) out << ',' << format_fixed(v, 6);
        out << ',' << (g == best ? 1 : 0) << '\n';
    }
    return out.str();
}

ClassifierModel purify(ClassifierModel model, std::string* warning) {
    auto* forest = dynamic_cast<RandomForest*>(model.classifier.get());
    if (!forest) {
        if (warning) *warning = "purify: " + std::string(to_string(model.family)) + " models are left unchanged";
        return model;
    }
    forest->purify();
    model.purified = true;
    return model;
}

void ModelRegistry::set(const std::string& tag, const std::filesystem::path& model_path) {
    paths_[tag] = std::filesystem::absolute(model_path).lexically_normal();
}

const std::filesystem::path& ModelRegistry::path(std::string_view tag) const {
    auto it = paths_.find(tag);
    if (it == paths_.end()) fail_data("model registry has no model for tag '" + std::string(tag) + "'");
    return it->second;
}

bool ModelRegistry::contains(std::string_view tag) const { return paths_.find(tag) != paths_.end(); }

std::vector<std::string> ModelRegistry::tags() const {
    std::vector<std::string> out;
    for (const auto& [t, p] : paths_) out.push_back(t);
    return out;
}

void ModelRegistry::save(const std::filesystem::path& file) const {
    auto base = std::filesystem::absolute(file).parent_path();
    ordered_json j;
    j["format"] = "craml-registry";
    j["version"] = 1;
    j["models"] = ordered_json::object();
    for (const auto& [t, p] : paths_) j["models"][t] = p.lexically_relative(base).generic_string();
    write_file(file, j.dump(2) + "\n");
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::exception& e) {
        fail_data(file.string() + ": invalid JSON: " + e.what());
    }
    if (j.value("format", "") != "craml-registry" || j.value("version", -1) != 1) {
        fail_data(file.string() + ": not a version 1 model registry");
    }
    ModelRegistry r;
    auto base = std::filesystem::absolute(file).parent_path();
    for (const auto& [t, p] : j.at("models").items()) r.set(t, base / p.get<std::string>());
    return r;
}

ClassifierModel ModelRegistry::load_model(std::string_view tag) const { return craml::load_model(path(tag)); }

}  // namespace craml
