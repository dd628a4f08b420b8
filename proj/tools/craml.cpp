#include <CLI11.hpp>

#include "craml/corpus.hpp"
#include "craml/csv.hpp"
#include "craml/dataset.hpp"
#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/extrapolation.hpp"
#include "craml/ngram.hpp"
#include "craml/pipeline.hpp"
#include "craml/rules.hpp"
#include "craml/service.hpp"
#include "craml/store.hpp"
#include "craml/synthetic.hpp"
#include "craml/util.hpp"
#include "craml/validation.hpp"

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace craml;

namespace {

CleaningProfile load_profile(const std::string& path) {
    return path.empty() ? CleaningProfile::defaults() : CleaningProfile::load(path);
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") std::cout << text;
    else write_file(out, text);
}

std::vector<fs::path> extract_files_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail_state("extract directory " + dir.string() + " does not exist; run 'extract' first");
    auto files = list_extract_files(dir);
    if (files.empty()) fail_state("no extract files under " + dir.string() + "; run 'extract' first");
    return files;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"craml: keyword extraction, rule extrapolation and classifier training for contract corpora"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version());
    std::size_t jobs = 1;
    app.add_option("--jobs,-j", jobs, "Worker threads for parallel steps")->check(CLI::PositiveNumber);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Enumerate a corpus and join it against metadata");
    std::string corpus, metadata, out, profile, extension = ".txt";
    ingest_cmd->add_option("--corpus", corpus, "Directory of plain-text documents")->required();
    ingest_cmd->add_option("--metadata", metadata, "Metadata CSV with a doc_id column");
    ingest_cmd->add_option("--out", out, "Directory for manifest.csv, orphans.csv, errors.csv")->required();
    ingest_cmd->add_option("--profile", profile, "Cleaning profile JSON");
    ingest_cmd->add_option("--ext", extension, "Document file extension (empty accepts all)");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "Extract keyword windows per tag");
    std::string manifest, keywords, unit = "words";
    std::size_t window = 6;
    double sample = 1.0;
    std::uint64_t seed = 0;
    std::size_t rows_per_file = 50000;
    extract_cmd->add_option("--manifest", manifest, "manifest.csv written by ingest")->required();
    extract_cmd->add_option("--keywords", keywords, "Keyword config JSON (tag -> keywords)")->required();
    extract_cmd->add_option("--metadata", metadata, "Metadata CSV copied into extract rows");
    extract_cmd->add_option("--profile", profile, "Cleaning profile JSON");
    extract_cmd->add_option("--n", window, "Window half-width")->check(CLI::PositiveNumber);
    extract_cmd->add_option("--unit", unit, "Window unit")->check(CLI::IsMember({"words", "sentences"}));
    extract_cmd->add_option("--out", out, "Output directory")->required();
    extract_cmd->add_option("--sample", sample, "Document sampling fraction")->check(CLI::Range(0.0, 1.0));
    extract_cmd->add_option("--seed", seed, "Sampling seed");
    extract_cmd->add_option("--rows-per-file", rows_per_file, "Rows per part file")->check(CLI::PositiveNumber);

    // ngrams
    auto* ngrams_cmd = app.add_subcommand("ngrams", "Count centred n-grams over extract windows");
    std::string extract_dir, center = "midpoint", tag;
    std::size_t ngram_n = 3, limit = 0;
    ngrams_cmd->add_option("--extract", extract_dir, "Extract directory of one tag")->required();
    ngrams_cmd->add_option("--n", ngram_n, "N-gram length")->check(CLI::PositiveNumber);
    ngrams_cmd->add_option("--center", center, "Centre on the keyword or the window midpoint")
        ->check(CLI::IsMember({"keyword", "midpoint"}));
    ngrams_cmd->add_option("--keywords", keywords, "Keyword config, required for --center keyword");
    ngrams_cmd->add_option("--tag", tag, "Tag whose keywords centre the window");
    ngrams_cmd->add_option("--limit", limit, "Print at most this many rows (0 = all)");
    ngrams_cmd->add_option("--out", out, "Output CSV (default stdout)");

    // rules
    auto* rules_cmd = app.add_subcommand("rules", "Rule file tools");
    rules_cmd->require_subcommand(1);
    auto* rules_check = rules_cmd->add_subcommand("check", "Validate a rule file and summarise coverage");
    std::string rules_file;
    rules_check->add_option("file", rules_file, "Rule CSV")->required();
    rules_check->add_option("--extract", extract_dir, "Extract directory to measure coverage on");

    // extrapolate
    auto* extrap_cmd = app.add_subcommand("extrapolate", "Label extract chunks with a rule file");
    double rate = 1.0;
    bool neg = false, augment = false;
    std::optional<double> neg_ratio;
    extrap_cmd->add_option("--extract", extract_dir, "Extract directory")->required();
    extrap_cmd->add_option("--rules", rules_file, "Rule CSV")->required();
    extrap_cmd->add_option("--s,--rate", rate, "Row sampling rate")->check(CLI::Range(0.0, 1.0));
    extrap_cmd->add_flag("--neg", neg, "Add unmatched chunks as NEGATIVE rows");
    extrap_cmd->add_option("--neg-ratio", neg_ratio, "Negatives admitted per positive");
    extrap_cmd->add_flag("--augment", augment, "Keep positives from rows the sampler skipped");
    extrap_cmd->add_option("--seed", seed, "Sampling seed")->required();
    extrap_cmd->add_option("--out", out, "Training CSV")->required();

    // validate
    auto* validate_cmd = app.add_subcommand("validate", "Blind hand-coding round trip");
    validate_cmd->require_subcommand(1);
    auto* vexport = validate_cmd->add_subcommand("export", "Write a coder file and its answer key");
    std::string training, coder, key, coded;
    std::size_t per_rule = 10;
    double boost = 1.0;
    vexport->add_option("--training", training, "Training CSV")->required();
    vexport->add_option("--per-rule", per_rule, "Rows sampled per catching rule");
    vexport->add_option("--positive-boost", boost, "Sampling weight of positive rows")->check(CLI::PositiveNumber);
    vexport->add_option("--seed", seed, "Sampling seed")->required();
    vexport->add_option("--coder", coder, "Coder CSV (blank tag columns)")->required();
    vexport->add_option("--key", key, "Answer key CSV")->required();
    auto* vscore = validate_cmd->add_subcommand("score", "Compare a coded file to its answer key");
    vscore->add_option("--coded", coded, "Coded CSV")->required();
    vscore->add_option("--key", key, "Answer key CSV")->required();
    vscore->add_option("--out", out, "Report JSON (default stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Grid search, fit and evaluate classifiers for one tag");
    std::vector<std::string> families = {"rf"};
    std::string grid = "default";
    std::size_t folds = 5, trim = 0;
    bool purify = false;
    std::vector<std::string> qualifiers, keeps;
    train_cmd->add_option("--training", training, "Training CSV")->required();
    train_cmd->add_option("--tag", tag, "Tag to learn")->required();
    train_cmd->add_option("--family", families, "Model family: nb, lr, sgd, rf (repeatable)");
    train_cmd->add_option("--grid", grid, "'default' or key=v1/v2,... per family");
    train_cmd->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 100));
    train_cmd->add_flag("--purify", purify, "Purify random forests");
    train_cmd->add_option("--seed", seed, "Training seed")->required();
    train_cmd->add_option("--out", out, "Models directory")->required();
    train_cmd->add_option("--trim", trim, "Keep this many words either side of the keyword");
    train_cmd->add_option("--keywords", keywords, "Keyword config, required with --trim");
    train_cmd->add_option("--qualifier", qualifiers, "Word(s) always kept ahead of the trimmed window");
    train_cmd->add_option("--keep", keeps, "Word(s) kept when present anywhere in the chunk");

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "Predict tags for every extracted chunk");
    std::string registry;
    classify_cmd->add_option("--extract", extract_dir, "Extract root (one subdirectory per tag)")->required();
    classify_cmd->add_option("--keywords", keywords, "Keyword config")->required();
    auto* reg_opt = classify_cmd->add_option("--registry", registry, "Model registry JSON");
    auto* rules_opt = classify_cmd->add_option("--rules", rules_file, "Label with a rule file instead of models");
    reg_opt->excludes(rules_opt);
    classify_cmd->add_option("--out", out, "Predictions CSV")->required();

    // aggregate
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Roll chunk predictions up to documents or records");
    std::string predictions, level = "record", orphans;
    aggregate_cmd->add_option("--predictions", predictions, "Predictions CSV")->required();
    aggregate_cmd->add_option("--metadata", metadata, "Metadata CSV")->required();
    aggregate_cmd->add_option("--level", level, "Aggregation level")->check(CLI::IsMember({"document", "record"}));
    aggregate_cmd->add_option("--out", out, "Tag table CSV")->required();
    aggregate_cmd->add_option("--orphans", orphans, "CSV of predicted ids missing from the metadata");

    // prevalence
    auto* prevalence_cmd = app.add_subcommand("prevalence", "Yearly share of tagged rows");
    std::string table, by = "year", date_column = "effective_date";
    prevalence_cmd->add_option("--table", table, "Tag table CSV or SQLite database")->required();
    prevalence_cmd->add_option("--by", by, "Grouping")->check(CLI::IsMember({"year"}));
    prevalence_cmd->add_option("--date-column", date_column, "Metadata column holding YYYY-MM[-DD] dates");
    prevalence_cmd->add_option("--out", out, "Prevalence CSV (default stdout)");

    // store
    auto* store_cmd = app.add_subcommand("store", "Write a tag table to SQLite or CSV");
    std::string db, table_name = "tags";
    store_cmd->add_option("--table", table, "Tag table CSV")->required();
    store_cmd->add_option("--db", db, "Target: .db/.sqlite/.sqlite3 for SQLite, otherwise CSV")->required();
    store_cmd->add_option("--name", table_name, "SQLite table name");
    store_cmd->add_option("--predictions", predictions, "Also store a predictions CSV in SQLite");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run pipeline steps from a project config");
    std::string config;
    std::vector<std::string> steps;
    bool force = false;
    run_cmd->add_option("--config", config, "Project config JSON")->required();
    run_cmd->add_option("--steps", steps, "Steps to run (default all)")->delimiter(',')->check(CLI::IsMember(kPipelineSteps));
    run_cmd->add_flag("--force", force, "Re-run steps even when up to date");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "HTTP+JSON API over a directory of projects");
    std::string root = ".", host = "127.0.0.1";
    int port = 8080;
    serve_cmd->add_option("--root", root, "Directory holding one subdirectory per project");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    bool write_openapi = false;
    serve_cmd->add_flag("--openapi", write_openapi, "Print the endpoint description and exit");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic no-poach corpus and project config");
    SyntheticOptions so;
    synth_cmd->add_option("--out", out, "Output directory")->required();
    synth_cmd->add_option("--documents", so.documents, "Number of documents")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--docs-per-record", so.docs_per_record, "Documents per record")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", so.seed, "Generator seed");
    synth_cmd->add_flag("--partial-final-year", so.partial_final_year, "Omit December from the last year");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest_cmd) {
            IngestOptions opts;
            opts.extension = extension;
            opts.profile_version = load_profile(profile).version();
            std::optional<fs::path> meta;
            if (!metadata.empty()) meta = metadata;
            CorpusManifest m = ingest(corpus, meta, opts);
            m.write(out);
            std::cerr << m.entries.size() << " documents, " << m.orphans.size() << " without metadata, "
                      << m.errors.size() << " errors\n";
        } else if (*extract_cmd) {
            CorpusManifest m = CorpusManifest::load(manifest);
            std::optional<MetadataTable> meta;
            if (!metadata.empty()) meta = MetadataTable::load(metadata);
            ExtractOptions opts;
            opts.window = {window, parse_window_unit(unit)};
            opts.rows_per_file = rows_per_file;
            opts.jobs = jobs;
            opts.sample = sample;
            opts.sample_seed = seed;
            ExtractResult r = extract_corpus(m, meta ? &*meta : nullptr, KeywordConfig::load(keywords),
                                             load_profile(profile), out, opts);
            std::cerr << r.documents_with_hits << " of " << r.documents << " documents contain keywords, "
                      << r.chunks_written << " chunks in " << r.files.size() << " files\n";
            for (const auto& e : r.errors) std::cerr << "error: " << e.path << ": " << e.message << '\n';
        } else if (*ngrams_cmd) {
            Centering c = parse_centering(center);
            std::vector<std::string> kws;
            if (!keywords.empty()) {
                KeywordConfig k = KeywordConfig::load(keywords);
                std::string t = tag.empty() ? fs::path(extract_dir).lexically_normal().filename().string() : tag;
                if (t.empty() || !k.has_tag(t)) fail_usage("unknown tag '" + t + "'; pass --tag");
                kws = k.keywords_for(t);
            } else if (c == Centering::keyword) {
                fail_usage("--center keyword needs --keywords");
            }
            NgramReport rep = ngram_explore(extract_files_in(extract_dir), ngram_n, c, kws, jobs);
            if (limit > 0 && rep.rows.size() > limit) rep.rows.resize(limit);
            if (out.empty() || out == "-") {
                std::ostringstream o;
                csv::Writer w(o);
                w.write({"ngram", "count"});
                for (const auto& r : rep.rows) w.write({r.ngram, std::to_string(r.count)});
                std::cout << o.str();
            } else {
                write_ngram_report(rep, out, ngram_n, c);
            }
        } else if (*rules_check) {
            RuleSet rs = RuleSet::load(rules_file);
            std::cout << rs.rules().size() << " rules, tags: " << join(rs.tags(), ", ") << '\n';
            if (!extract_dir.empty()) {
                std::vector<std::string> chunks;
                for_each_extract_row(extract_files_in(extract_dir), [&](const ExtractFile&, const ExtractRow& r) {
                    chunks.insert(chunks.end(), r.chunks.begin(), r.chunks.end());
                });
                RuleCoverage cov = rule_coverage(rs, chunks);
                std::ostringstream o;
                csv::Writer w(o);
                w.write({"rule", "prio", "matches", "wins"});
                for (std::size_t i = 0; i < rs.rules().size(); ++i) {
                    const Rule& r = rs.rules()[i];
                    w.write({r.display(), std::to_string(r.prio), std::to_string(cov.matches[i]),
                             std::to_string(cov.wins[i])});
                }
                std::cout << o.str() << cov.chunks << " chunks, " << cov.unmatched << " unmatched\n";
            }
        } else if (*extrap_cmd) {
            ExtrapolateOptions opts;
            opts.rate = rate;
            opts.negative_sampling = neg;
            opts.negative_ratio = neg_ratio;
            opts.augment_positives = augment;
            opts.seed = seed;
            opts.jobs = jobs;
            RuleSet rs = RuleSet::parse(read_file(rules_file), fs::path(rules_file).filename().string());
            TrainingSet set = extrapolate(extract_files_in(extract_dir), rs, opts);
            for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
            write_training(set, out);
            std::cerr << set.rows.size() << " training rows\n";
        } else if (*vexport) {
            ValidationSample s = make_validation_sample(read_training(training), per_rule, boost, seed);
            write_validation_sample(s, coder, key);
            std::cerr << s.coder_rows.size() << " rows to code\n";
        } else if (*vscore) {
            AgreementReport r = score_validation(parse_coded_file(read_file(coded)), parse_answer_key(read_file(key)));
            emit(out, r.to_json() + "\n");
        } else if (*train_cmd) {
            TrainRequest req;
            req.training = training;
            req.tag = tag;
            req.families.clear();
            for (const auto& f : families) req.families.push_back(parse_family(f));
            req.grid = grid;
            req.folds = folds;
            req.purify = purify;
            req.seed = seed;
            req.jobs = jobs;
            req.models_dir = out;
            if (trim > 0) {
                if (keywords.empty()) fail_usage("--trim needs --keywords");
                TrimConfig t;
                t.trim = trim;
                for (const auto& q : qualifiers) t.qualifiers.push_back(to_lower_ascii(q));
                for (const auto& k : keeps) t.keeps.push_back(to_lower_ascii(k));
                t.keywords = KeywordConfig::load(keywords).keywords_for(tag);
                req.trim = t;
            }
            auto trained = train_models(req, &std::cerr);
            record_trained(out, tag, trained);
            for (const auto& m : trained) {
                std::cout << short_name(m.family) << ' ' << params_to_string(m.params) << " cv_f1="
                          << format_fixed(m.cv_f1, 4) << " f1=" << format_fixed(m.metrics.f1, 4)
                          << (m.selected ? " selected" : "") << ' ' << m.file.filename().string() << '\n';
            }
        } else if (*classify_cmd) {
            KeywordConfig k = KeywordConfig::load(keywords);
            Predictions p;
            if (!rules_file.empty()) {
                p = classify_with_rules(extract_dir, RuleSet::load(rules_file), k);
            } else {
                if (registry.empty()) fail_usage("classify needs --registry or --rules");
                p = classify_corpus(extract_dir, ModelRegistry::load(registry), k, jobs);
            }
            write_predictions(p, out);
            for (const auto& [t, s] : p.stats) {
                std::cerr << t << ": " << s.chunks << " chunks, " << s.gated << " gated, " << s.model_calls
                          << " model calls\n";
            }
        } else if (*aggregate_cmd) {
            MetadataTable meta = MetadataTable::load(metadata);
            Predictions p = read_predictions(predictions);
            AggregateResult r = aggregate(p, meta, {Level::document, {}});
            TagTable t = parse_level(level) == Level::record ? roll_up(r.table, meta) : r.table;
            write_tag_table(t, out);
            if (!orphans.empty()) {
                std::ostringstream o;
                csv::Writer w(o);
                w.write({"doc_id"});
                for (const auto& id : r.orphans) w.write({id});
                write_file(orphans, o.str());
            }
            if (!r.orphans.empty()) std::cerr << r.orphans.size() << " predicted ids missing from the metadata\n";
        } else if (*prevalence_cmd) {
            auto series = prevalence_series(load_table(table), date_column);
            for (const auto& s : series) {
                if (s.excluded > 0) std::cerr << s.tag << ": " << s.excluded << " rows without a usable date\n";
                if (s.partial_final_year) std::cerr << s.tag << ": final year is partial\n";
            }
            emit(out, prevalence_to_csv(series));
        } else if (*store_cmd) {
            fs::path target = db;
            if (!predictions.empty()) {
                auto ext = target.extension().string();
                if (ext != ".db" && ext != ".sqlite" && ext != ".sqlite3") fail_usage("--predictions needs a SQLite target");
            }
            TagTable t = read_tag_table(table);
            auto ext = target.extension().string();
            if (ext == ".db" || ext == ".sqlite" || ext == ".sqlite3") store_sqlite(t, target, table_name);
            else store_table(t, target);
            if (!predictions.empty()) store_predictions_sqlite(read_predictions(predictions), target);
        } else if (*run_cmd) {
            ProjectConfig c = ProjectConfig::load(config);
            if (app.count("--jobs")) c.jobs = jobs;
            RunOptions opts;
            opts.steps = steps;
            opts.force = force;
            opts.log = &std::cerr;
            RunManifest m = run_pipeline(c, opts);
            for (const auto& s : m.steps) {
                std::cout << s.step << ": " << s.status << " (" << s.artifacts.size() << " artifacts, "
                          << format_fixed(s.seconds, 2) << " s)\n";
            }
        } else if (*serve_cmd) {
            if (write_openapi) {
                std::cout << openapi_json();
                return 0;
            }
            ServiceOptions so2;
            so2.jobs = jobs;
            Service service(root, so2);
            std::cerr << "listening on http://" << host << ':' << port << '\n';
            serve(service, host, port);
        } else if (*synth_cmd) {
            SyntheticCorpus s = generate_synthetic(out, so);
            write_file(fs::path(out) / "craml.json", synthetic_project_config(so.seed));
            std::cerr << s.documents << " documents in " << s.records << " records under " << out << '\n';
            for (const auto& y : s.years) {
                std::cout << y.year << ' ' << y.positive << '/' << y.records << ' ' << format_fixed(y.percent, 1) << "%\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::usage ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
