#include "craml/pipeline.hpp"

#include "craml/corpus.hpp"
#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/extrapolation.hpp"
#include "craml/learning/forest.hpp"
#include "craml/store.hpp"
#include "craml/util.hpp"
#include "craml/validation.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ostream>
#include <set>
#include <sstream>

namespace craml {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T required(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) fail_usage(std::string("config: missing required key '") + where + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail_usage(std::string("config: key '") + where + key + "' has the wrong type");
    }
}

template <typename T>
T optional_value(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail_usage(std::string("config: key '") + key + "' has the wrong type");
    }
}

}  // namespace

ProjectConfig ProjectConfig::load(const fs::path& path) {
    return parse(read_file(path), fs::absolute(path).parent_path());
}

ProjectConfig ProjectConfig::parse(std::string_view text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail_usage(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail_usage("config: top level must be an object");
    static const std::set<std::string> known = {"corpus",   "metadata", "keywords", "profile",  "rules",   "project",
                                                "window",   "unit",     "extract_sample",       "ngrams",  "extrapolate",
                                                "validate", "train",    "aggregate", "store",   "seeds",   "jobs"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) fail_usage("config: unknown key '" + k + "'");
    }
    auto resolve = [&](const std::string& p) { return (base_dir / p).lexically_normal(); };

    ProjectConfig c;
    c.corpus = resolve(required<std::string>(j, "corpus", ""));
    if (j.contains("metadata") && !j["metadata"].is_null()) c.metadata = resolve(j["metadata"].get<std::string>());
    c.keywords = resolve(required<std::string>(j, "keywords", ""));
    if (j.contains("profile") && !j["profile"].is_null()) c.profile = resolve(j["profile"].get<std::string>());
    const json& rules = j.contains("rules") ? j["rules"] : json();
    if (rules.is_string()) c.rules.push_back(resolve(rules.get<std::string>()));
    else if (rules.is_array()) {
        for (const auto& r : rules) c.rules.push_back(resolve(r.get<std::string>()));
    }
    if (c.rules.empty()) fail_usage("config: 'rules' must name at least one rule file");
    c.project = resolve(required<std::string>(j, "project", ""));

    c.window.n = optional_value<std::size_t>(j, "window", 6);
    c.window.unit = parse_window_unit(optional_value<std::string>(j, "unit", "words"));
    c.extract_sample = optional_value<double>(j, "extract_sample", 1.0);

    json ng = j.value("ngrams", json::object());
    c.ngram_n = optional_value<std::size_t>(ng, "n", 3);
    c.ngram_center = parse_centering(optional_value<std::string>(ng, "center", "midpoint"));

    json ex = j.value("extrapolate", json::object());
    c.rate = optional_value<double>(ex, "rate", 1.0);
    c.augment_positives = optional_value<bool>(ex, "augment_positives", false);
    c.negative_sampling = optional_value<bool>(ex, "negative_sampling", false);
    if (ex.contains("negative_ratio") && !ex["negative_ratio"].is_null()) c.negative_ratio = ex["negative_ratio"].get<double>();

    json va = j.value("validate", json::object());
    c.validate_per_rule = optional_value<std::size_t>(va, "per_rule", 10);
    c.positive_boost = optional_value<double>(va, "positive_boost", 1.0);

    json tr = j.value("train", json::object());
    if (tr.contains("families")) {
        c.families.clear();
        for (const auto& f : tr["families"]) c.families.push_back(parse_family(f.get<std::string>()));
        if (c.families.empty()) fail_usage("config: train.families is empty");
    }
    c.grid = optional_value<std::string>(tr, "grid", "default");
    c.folds = optional_value<std::size_t>(tr, "folds", 5);
    c.purify = optional_value<bool>(tr, "purify", false);
    c.train_tags = optional_value<std::vector<std::string>>(tr, "tags", {});
    if (tr.contains("trim")) {
        for (const auto& [tag, cfg] : tr["trim"].items()) c.trim[tag] = TrimConfig::from_json(cfg);
    }

    json ag = j.value("aggregate", json::object());
    c.level = parse_level(optional_value<std::string>(ag, "level", "record"));
    json st = j.value("store", json::object());
    c.database = optional_value<std::string>(st, "database", "craml.db");

    if (!j.contains("seeds")) fail_usage("config: missing required key 'seeds' (seeds have no defaults)");
    const json& s = j["seeds"];
    c.seeds.extract = required<std::uint64_t>(s, "extract", "seeds.");
    c.seeds.extrapolate = required<std::uint64_t>(s, "extrapolate", "seeds.");
    c.seeds.validate = required<std::uint64_t>(s, "validate", "seeds.");
    c.seeds.train = required<std::uint64_t>(s, "train", "seeds.");
    c.jobs = std::max<std::size_t>(1, optional_value<std::size_t>(j, "jobs", 1));
    return c;
}

const StepReport* RunManifest::find(std::string_view step) const {
    for (const auto& s : steps) {
        if (s.step == step) return &s;
    }
    return nullptr;
}

namespace {

const std::map<std::string, std::vector<std::string>> kDepends = {
    {"ingest", {}},           {"extract", {"ingest"}},    {"ngrams", {"extract"}},
    {"extrapolate", {"extract"}}, {"validate", {"extrapolate"}}, {"train", {"extrapolate"}},
    {"classify", {"train", "extract"}}, {"aggregate", {"classify"}}, {"store", {"aggregate"}},
};

std::string rel(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).generic_string(); }

class Runner {
public:
    Runner(const ProjectConfig& c, const RunOptions& o) : c_(c), o_(o), root_(fs::absolute(c.project)) {
        fs::create_directories(root_);
        manifest_path_ = root_ / "run_manifest.json";
        if (fs::exists(manifest_path_)) {
            try {
                state_ = json::parse(read_file(manifest_path_));
            } catch (const json::exception&) {
                state_ = json::object();
            }
        }
        if (!state_.is_object() || !state_.contains("steps")) state_ = {{"version", 1}, {"steps", json::object()}};
        keywords_ = KeywordConfig::load(c.keywords);
        profile_ = c.profile ? CleaningProfile::load(*c.profile) : CleaningProfile::defaults();
    }

    RunManifest run() {
        std::vector<std::string> steps = o_.steps.empty() ? kPipelineSteps : o_.steps;
        for (const auto& s : steps) {
            if (std::find(kPipelineSteps.begin(), kPipelineSteps.end(), s) == kPipelineSteps.end()) {
                fail_usage("unknown step '" + s + "' (expected one of " + join(kPipelineSteps, ", ") + ")");
            }
        }
        std::set<std::string> requested(steps.begin(), steps.end());
        RunManifest out;
        for (const auto& step : kPipelineSteps) {
            if (!requested.count(step)) continue;
            for (const auto& dep : kDepends.at(step)) {
                if (!requested.count(dep) && !artifacts_present(dep)) {
                    fail_state("step '" + step + "' needs the artifacts of step '" + dep + "'; run '" + dep +
                               "' first");
                }
            }
            out.steps.push_back(run_step(step));
        }
        return out;
    }

private:
    bool artifacts_present(const std::string& step) const {
        const json& steps = state_["steps"];
        if (!steps.contains(step)) return false;
        for (const auto& [p, h] : steps[step]["artifacts"].items()) {
            if (!fs::exists(root_ / p)) return false;
        }
        return true;
    }

    std::string artifact_hashes(const std::string& step) const {
        const json& steps = state_["steps"];
        if (!steps.contains(step)) return "";
        std::string s;
        for (const auto& [p, h] : steps[step]["artifacts"].items()) s += p + "=" + h.get<std::string>() + ";";
        return s;
    }

    std::string input_hash(const std::string& step) const {
        std::ostringstream in;
        in << "step=" << step << ";version=" << tool_version() << ";";
        auto field = [&](const char* k, const std::string& v) { in << k << '=' << v << ';'; };
        if (step == "ingest") {
            field("corpus", fs::absolute(c_.corpus).lexically_normal().generic_string());
            field("profile", profile_.version());
            if (c_.metadata) field("metadata", hash_file(*c_.metadata));
            std::vector<std::string> files;
            if (fs::is_directory(c_.corpus)) {
                for (const auto& e : fs::recursive_directory_iterator(c_.corpus)) {
                    if (e.is_regular_file()) {
                        files.push_back(rel(e.path(), c_.corpus) + ":" + std::to_string(e.file_size()) + ":" +
                                        hash_file(e.path()));
                    }
                }
            }
            std::sort(files.begin(), files.end());
            field("files", hex64(fnv1a64(join(files, "\n"))));
        } else if (step == "extract") {
            field("keywords", keywords_.hash());
            field("window", std::to_string(c_.window.n) + std::string(to_string(c_.window.unit)));
            field("sample", format_fixed(c_.extract_sample, 6));
            field("seed", std::to_string(c_.seeds.extract));
            if (c_.metadata) field("metadata", hash_file(*c_.metadata));
        } else if (step == "ngrams") {
            field("n", std::to_string(c_.ngram_n));
            field("center", std::string(to_string(c_.ngram_center)));
        } else if (step == "extrapolate") {
            for (const auto& r : c_.rules) field("rules", r.filename().string() + ":" + hash_file(r));
            field("rate", format_fixed(c_.rate, 6));
            field("augment", c_.augment_positives ? "1" : "0");
            field("negative", c_.negative_sampling ? "1" : "0");
            field("ratio", c_.negative_ratio ? format_fixed(*c_.negative_ratio, 6) : "none");
            field("seed", std::to_string(c_.seeds.extrapolate));
        } else if (step == "validate") {
            field("per_rule", std::to_string(c_.validate_per_rule));
            field("boost", format_fixed(c_.positive_boost, 6));
            field("seed", std::to_string(c_.seeds.validate));
        } else if (step == "train") {
            for (auto f : c_.families) field("family", std::string(to_string(f)));
            field("grid", c_.grid);
            field("folds", std::to_string(c_.folds));
            field("purify", c_.purify ? "1" : "0");
            field("tags", join(c_.train_tags, ","));
            for (const auto& [t, tc] : c_.trim) field("trim", t + ":" + tc.to_json().dump());
            field("seed", std::to_string(c_.seeds.train));
        } else if (step == "classify") {
            for (const auto& r : c_.rules) field("rules", r.filename().string() + ":" + hash_file(r));
        } else if (step == "aggregate") {
            field("level", std::string(to_string(c_.level)));
            if (c_.metadata) field("metadata", hash_file(*c_.metadata));
        } else if (step == "store") {
            field("database", c_.database);
        }
        for (const auto& dep : kDepends.at(step)) field(dep.c_str(), artifact_hashes(dep));
        return hex64(fnv1a64(in.str()));
    }

    bool up_to_date(const std::string& step, const std::string& hash) const {
        if (o_.force) return false;
        const json& steps = state_["steps"];
        if (!steps.contains(step) || steps[step].value("input_hash", "") != hash) return false;
        for (const auto& [p, h] : steps[step]["artifacts"].items()) {
            fs::path f = root_ / p;
            if (!fs::exists(f) || hash_file(f) != h.get<std::string>()) return false;
        }
        return true;
    }

    // a rule file kept inside the project doubles as its own copy
    bool is_input(const fs::path& p) const {
        std::error_code ec;
        for (const auto& r : c_.rules) {
            if (fs::exists(r) && fs::equivalent(r, p, ec)) return true;
        }
        return false;
    }

    StepReport run_step(const std::string& step) {
        auto start = std::chrono::steady_clock::now();
        StepReport r;
        r.step = step;
        r.input_hash = input_hash(step);
        if (up_to_date(step, r.input_hash)) {
            r.status = "up-to-date";
            for (const auto& [p, h] : state_["steps"][step]["artifacts"].items()) r.artifacts.push_back(p);
            log(step + ": up to date");
            return r;
        }
        // stale artifacts from an earlier run of this step
        if (state_["steps"].contains(step)) {
            for (const auto& [p, h] : state_["steps"][step]["artifacts"].items()) {
                if (!is_input(root_ / p)) fs::remove(root_ / p);
            }
            state_["steps"].erase(step);
        }
        std::vector<fs::path> produced;
        if (step == "ingest") produced = ingest_step();
        else if (step == "extract") produced = extract_step();
        else if (step == "ngrams") produced = ngrams_step();
        else if (step == "extrapolate") produced = extrapolate_step();
        else if (step == "validate") produced = validate_step();
        else if (step == "train") produced = train_step();
        else if (step == "classify") produced = classify_step();
        else if (step == "aggregate") produced = aggregate_step();
        else if (step == "store") produced = store_step();

        json artifacts = json::object();
        for (const auto& p : produced) {
            std::string key = rel(p, root_);
            artifacts[key] = hash_file(p);
            r.artifacts.push_back(key);
        }
        std::sort(r.artifacts.begin(), r.artifacts.end());
        state_["steps"][step] = {{"input_hash", r.input_hash}, {"artifacts", artifacts}};
        write_file(manifest_path_, state_.dump(2) + "\n");
        r.status = "ran";
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log(step + ": ran in " + format_fixed(r.seconds, 2) + " s, " + std::to_string(produced.size()) + " artifact(s)");
        return r;
    }

    void log(const std::string& msg) const {
        if (o_.log) *o_.log << msg << '\n';
    }

    // ---- steps ---------------------------------------------------------------

    std::vector<fs::path> ingest_step() {
        IngestOptions opts;
        opts.profile_version = profile_.version();
        auto corpus = fs::absolute(c_.corpus).lexically_normal();
        CorpusManifest m = ingest(corpus, c_.metadata, opts);
        m.write(root_ / "corpus");
        log("ingest: " + std::to_string(m.entries.size()) + " documents, " + std::to_string(m.orphans.size()) +
            " without metadata, " + std::to_string(m.errors.size()) + " errors");
        return {root_ / "corpus/manifest.csv", root_ / "corpus/orphans.csv", root_ / "corpus/errors.csv"};
    }

    std::optional<MetadataTable> metadata() const {
        if (!c_.metadata) return std::nullopt;
        return MetadataTable::load(*c_.metadata);
    }

    std::vector<fs::path> extract_step() {
        CorpusManifest m = CorpusManifest::load(root_ / "corpus/manifest.csv");
        auto meta = metadata();
        ExtractOptions opts;
        opts.window = c_.window;
        opts.jobs = c_.jobs;
        opts.sample = c_.extract_sample;
        opts.sample_seed = c_.seeds.extract;
        ExtractResult res = extract_corpus(m, meta ? &*meta : nullptr, keywords_, profile_, root_ / "extracts", opts);
        log("extract: " + std::to_string(res.documents_with_hits) + " of " + std::to_string(res.documents) +
            " documents contain keywords, " + std::to_string(res.chunks_written) + " chunks");
        std::vector<fs::path> out = res.files;
        out.push_back(root_ / "extracts/keywords.json");
        return out;
    }

    std::vector<fs::path> extract_files(const std::string& tag) const {
        auto dir = root_ / "extracts" / tag;
        if (!fs::is_directory(dir)) fail_state("no extracts for tag '" + tag + "'; run 'extract' first");
        return list_extract_files(dir);
    }

    std::vector<fs::path> ngrams_step() {
        std::vector<fs::path> out;
        for (const auto& t : keywords_.tags()) {
            auto files = extract_files(t.tag);
            NgramReport rep = ngram_explore(files, c_.ngram_n, c_.ngram_center, t.keywords, c_.jobs);
            fs::path p = root_ / "ngrams" /
                         (t.tag + "_n" + std::to_string(c_.ngram_n) + "_" + std::string(to_string(c_.ngram_center)) + ".csv");
            write_ngram_report(rep, p, c_.ngram_n, c_.ngram_center);
            out.push_back(p);
        }
        return out;
    }

    RuleSet ruleset(const fs::path& p) const { return RuleSet::parse(read_file(p), p.filename().string()); }

    fs::path training_path(const fs::path& rules) const {
        return root_ / "training" / (rules.stem().string() + ".csv");
    }

    std::string extract_tag_for(const RuleSet& rs) const {
        for (const auto& t : rs.tags()) {
            if (keywords_.has_tag(t)) return t;
        }
        fail_data("rule file " + rs.source() + " has no tag present in the keyword config");
    }

    std::vector<fs::path> extrapolate_step() {
        std::vector<fs::path> out;
        for (const auto& rp : c_.rules) {
            RuleSet rs = ruleset(rp);
            fs::path copy = root_ / "rules" / rp.filename();
            write_file(copy, read_file(rp));
            out.push_back(copy);
            auto files = extract_files(extract_tag_for(rs));
            ExtrapolateOptions opts;
            opts.rate = c_.rate;
            opts.negative_sampling = c_.negative_sampling;
            opts.negative_ratio = c_.negative_ratio;
            opts.augment_positives = c_.augment_positives;
            opts.seed = c_.seeds.extrapolate;
            opts.jobs = c_.jobs;
            TrainingSet set = extrapolate(files, rs, opts);
            for (const auto& w : set.warnings) log("extrapolate: warning: " + w);
            write_training(set, training_path(rp));
            log("extrapolate: " + rp.filename().string() + " -> " + std::to_string(set.rows.size()) + " rows");
            out.push_back(training_path(rp));
        }
        return out;
    }

    std::vector<fs::path> validate_step() {
        std::vector<fs::path> out;
        for (const auto& rp : c_.rules) {
            TrainingSet set = read_training(training_path(rp));
            ValidationSample s = make_validation_sample(set, c_.validate_per_rule, c_.positive_boost, c_.seeds.validate);
            auto dir = root_ / "training" / "validation";
            auto coder = dir / (rp.stem().string() + "_coder.csv");
            auto key = dir / (rp.stem().string() + "_key.csv");
            write_validation_sample(s, coder, key);
            out.push_back(coder);
            out.push_back(key);
        }
        return out;
    }

    std::vector<std::pair<std::string, fs::path>> tag_training() const {
        std::vector<std::pair<std::string, fs::path>> out;
        std::set<std::string> seen;
        for (const auto& rp : c_.rules) {
            RuleSet rs = ruleset(rp);
            for (const auto& t : rs.tags()) {
                if (!c_.train_tags.empty() &&
                    std::find(c_.train_tags.begin(), c_.train_tags.end(), t) == c_.train_tags.end()) {
                    continue;
                }
                if (seen.insert(t).second) out.emplace_back(t, training_path(rp));
            }
        }
        for (const auto& t : c_.train_tags) {
            if (!seen.count(t)) fail_usage("train: tag '" + t + "' is not defined by any rule file");
        }
        return out;
    }

    std::vector<fs::path> train_step() {
        std::vector<fs::path> out;
        fs::path models = root_ / "models";
        for (const auto& [tag, path] : tag_training()) {
            TrainRequest req;
            req.training = path;
            req.tag = tag;
            req.families = c_.families;
            req.grid = c_.grid;
            req.folds = c_.folds;
            req.purify = c_.purify;
            req.seed = c_.seeds.train;
            req.jobs = c_.jobs;
            if (auto it = c_.trim.find(tag); it != c_.trim.end()) req.trim = it->second;
            req.models_dir = models;
            auto trained = train_models(req, o_.log);
            record_trained(models, tag, trained);
            for (const auto& t : trained) {
                out.push_back(t.file);
                out.push_back(t.grid_file);
            }
        }
        out.push_back(models / "metrics.csv");
        out.push_back(models / "registry.json");
        return out;
    }

    std::vector<fs::path> classify_step() {
        ModelRegistry registry = ModelRegistry::load(root_ / "models/registry.json");
        Predictions p = classify_corpus(root_ / "extracts", registry, keywords_, c_.jobs);
        for (const auto& [tag, s] : p.stats) {
            log("classify: " + tag + " " + std::to_string(s.chunks) + " chunks, " + std::to_string(s.gated) +
                " gated, " + std::to_string(s.model_calls) + " model calls");
        }
        write_predictions(p, root_ / "output/predictions.csv");
        std::vector<fs::path> out{root_ / "output/predictions.csv"};
        for (const auto& rp : c_.rules) {
            RuleSet rs = ruleset(rp);
            Predictions rp_pred = classify_with_rules(root_ / "extracts", rs, keywords_);
            fs::path path = root_ / "output" / ("predictions_rules_" + rp.stem().string() + ".csv");
            write_predictions(rp_pred, path);
            out.push_back(path);
        }
        return out;
    }

    std::vector<fs::path> aggregate_step() {
        auto meta = metadata();
        if (!meta) fail_usage("aggregate needs a metadata file in the config");
        std::vector<fs::path> out;
        Predictions p = read_predictions(root_ / "output/predictions.csv");
        AggregateResult docs = aggregate(p, *meta, {Level::document, {}});
        write_tag_table(docs.table, root_ / "output/tags_document.csv");
        out.push_back(root_ / "output/tags_document.csv");
        {
            std::ostringstream o;
            csv::Writer w(o);
            w.write({"doc_id"});
            for (const auto& id : docs.orphans) w.write({id});
            write_file(root_ / "output/orphans.csv", o.str());
            out.push_back(root_ / "output/orphans.csv");
        }
        TagTable main = docs.table;
        if (c_.level == Level::record) {
            main = roll_up(docs.table, *meta);
            write_tag_table(main, root_ / "output/tags_record.csv");
            out.push_back(root_ / "output/tags_record.csv");
        }
        auto series = prevalence_series(main);
        write_file(root_ / "output/prevalence.csv", prevalence_to_csv(series));
        out.push_back(root_ / "output/prevalence.csv");

        // rule-labelled tables as the reference for record metrics
        std::ostringstream rm;
        csv::Writer rw(rm);
        rw.write({"rules", "tag", "level", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"});
        for (const auto& rp : c_.rules) {
            Predictions rule_pred =
                read_predictions(root_ / "output" / ("predictions_rules_" + rp.stem().string() + ".csv"));
            TagTable ref = aggregate(rule_pred, *meta, {Level::document, {}}).table;
            if (c_.level == Level::record) ref = roll_up(ref, *meta);
            fs::path rpath = root_ / "output" / ("tags_" + std::string(to_string(c_.level)) + "_rules_" +
                                                 rp.stem().string() + ".csv");
            write_tag_table(ref, rpath);
            out.push_back(rpath);
            for (const auto& tag : ref.tags) {
                if (!main.tag_index(tag)) continue;
                TagTable a = ref, b = main;
                for (const auto& m : record_metrics(restrict(a, tag), restrict(b, tag))) {
                    const auto& k = m.metrics;
                    rw.write({rp.filename().string(), m.tag, std::string(to_string(c_.level)), format_fixed(k.accuracy, 6),
                              format_fixed(k.precision, 6), format_fixed(k.recall, 6), format_fixed(k.f1, 6),
                              std::to_string(k.tp), std::to_string(k.fp), std::to_string(k.fn), std::to_string(k.tn)});
                }
            }
        }
        write_file(root_ / "output/record_metrics.csv", rm.str());
        out.push_back(root_ / "output/record_metrics.csv");
        return out;
    }

    static TagTable restrict(const TagTable& t, const std::string& tag) {
        TagTable out = t;
        auto i = *t.tag_index(tag);
        out.tags = {tag};
        for (auto& r : out.rows) r.values = {r.values[i]};
        return out;
    }

    std::vector<fs::path> store_step() {
        fs::path db = root_ / "output" / c_.database;
        fs::remove(db);
        std::string name = c_.level == Level::record ? "tags_record.csv" : "tags_document.csv";
        store_sqlite(read_tag_table(root_ / "output" / name), db, "tags");
        if (c_.level == Level::record) store_sqlite(read_tag_table(root_ / "output/tags_document.csv"), db, "documents");
        store_predictions_sqlite(read_predictions(root_ / "output/predictions.csv"), db, "predictions");
        return {db};
    }

    const ProjectConfig& c_;
    const RunOptions& o_;
    fs::path root_;
    fs::path manifest_path_;
    json state_;
    KeywordConfig keywords_;
    CleaningProfile profile_;
};

}  // namespace

std::vector<TrainedModel> train_models(const TrainRequest& request, std::ostream* log) {
    TrainingSet set = read_training(request.training);
    TrainOptions opts;
    opts.seed = request.seed;
    opts.jobs = request.jobs;
    opts.trim = request.trim;
    std::vector<TrainedModel> out;
    for (Family f : request.families) {
        auto grid = parse_grid(f, request.grid);
        GridResult gr = grid_search(f, set, request.tag, grid, opts, request.folds);
        TrainedModel t;
        t.family = f;
        t.cv_f1 = gr.points[gr.best].mean_f1;
        t.grid_file = request.models_dir / ("grid_" + std::string(short_name(f)) + "_" + request.tag + ".csv");
        write_file(t.grid_file, gr.to_csv());
        ClassifierModel m = train(f, set, request.tag, gr.best_params(), opts);
        if (request.purify && f == Family::random_forest) m = purify(std::move(m));
        t.params = m.params;
        t.metrics = m.metrics;
        t.purified = m.purified;
        t.file = request.models_dir / m.file_name();
        save_model(m, t.file);
        if (log) {
            *log << "train: " << request.tag << ' ' << to_string(f) << ' ' << params_to_string(m.params) << " F1 "
                 << format_fixed(m.metrics.f1, 4) << '\n';
        }
        out.push_back(std::move(t));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].metrics.f1 > out[best].metrics.f1) best = i;
    }
    if (!out.empty()) out[best].selected = true;
    return out;
}

std::vector<MetricsRow> read_metrics_file(const fs::path& path) {
    std::vector<MetricsRow> out;
    if (!fs::exists(path)) return out;
    csv::Table t = csv::read_table(path, {.delimiter = ','});
    auto col = [&](const char* name) { return t.require_column(name); };
    for (const auto& r : t.rows) {
        MetricsRow m;
        m.tag = r[col("tag")];
        m.family = r[col("family")];
        m.params = r[col("params")];
        m.cv_f1 = std::stod(r[col("cv_f1")]);
        m.metrics = MetricsReport::from_counts(std::stoull(r[col("tp")]), std::stoull(r[col("fp")]),
                                               std::stoull(r[col("fn")]), std::stoull(r[col("tn")]));
        m.purified = r[col("purified")] == "1";
        m.model = r[col("model")];
        m.selected = r[col("selected")] == "1";
        out.push_back(std::move(m));
    }
    return out;
}

void record_trained(const fs::path& models_dir, const std::string& tag, std::span<const TrainedModel> models) {
    auto rows = read_metrics_file(models_dir / "metrics.csv");
    rows.erase(std::remove_if(rows.begin(), rows.end(), [&](const MetricsRow& r) { return r.tag == tag; }), rows.end());
    for (const auto& t : models) {
        rows.push_back({tag, std::string(to_string(t.family)), params_to_string(t.params), t.cv_f1, t.metrics,
                        t.purified, t.file.filename().string(), t.selected});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) { return a.tag < b.tag; });
    std::ostringstream o;
    csv::Writer w(o);
    w.write({"tag", "family", "params", "cv_f1", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn",
             "purified", "model", "selected"});
    for (const auto& r : rows) {
        const auto& k = r.metrics;
        w.write({r.tag, r.family, r.params, format_fixed(r.cv_f1, 6), format_fixed(k.accuracy, 6),
                 format_fixed(k.precision, 6), format_fixed(k.recall, 6), format_fixed(k.f1, 6), std::to_string(k.tp),
                 std::to_string(k.fp), std::to_string(k.fn), std::to_string(k.tn), r.purified ? "1" : "0", r.model,
                 r.selected ? "1" : "0"});
    }
    write_file(models_dir / "metrics.csv", o.str());

    ModelRegistry registry;
    if (fs::exists(models_dir / "registry.json")) registry = ModelRegistry::load(models_dir / "registry.json");
    for (const auto& t : models) {
        if (t.selected) registry.set(tag, t.file);
    }
    registry.save(models_dir / "registry.json");
}

RunManifest run_pipeline(const ProjectConfig& config, const RunOptions& options) {
    return Runner(config, options).run();
}

std::map<std::string, std::vector<std::string>> recorded_artifacts(const fs::path& project) {
    std::map<std::string, std::vector<std::string>> out;
    auto path = project / "run_manifest.json";
    if (!fs::exists(path)) return out;
    json j = json::parse(read_file(path));
    for (const auto& [step, v] : j["steps"].items()) {
        for (const auto& [p, h] : v["artifacts"].items()) out[step].push_back(p);
    }
    return out;
}

}  // namespace craml
