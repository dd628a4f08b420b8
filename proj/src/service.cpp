#include "craml/service.hpp"

#include "craml/csv.hpp"
#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/extrapolation.hpp"
#include "craml/ngram.hpp"
#include "craml/pipeline.hpp"
#include "craml/rules.hpp"
#include "craml/util.hpp"
#include "craml/validation.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <set>
#include <thread>

namespace craml {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct HttpError {
    int status;
    std::string message;
    json details = nullptr;
};

[[noreturn]] void http_fail(int status, std::string message, json details = nullptr) {
    throw HttpError{status, std::move(message), std::move(details)};
}

HttpResponse json_response(const ordered_json& j, int status = 200) {
    return {status, "application/json", j.dump(2) + "\n"};
}

std::vector<std::string> segments(std::string_view path) {
    std::vector<std::string> out;
    for (auto& s : split(path, '/')) {
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

json parse_body(const HttpRequest& r) {
    if (trim(r.body).empty()) return json::object();
    try {
        json j = json::parse(r.body);
        if (!j.is_object()) http_fail(400, "request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        http_fail(400, std::string("invalid JSON body: ") + e.what());
    }
}

template <typename T>
T body_value(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        http_fail(400, std::string("field '") + key + "' has the wrong type");
    }
}

bool safe_name(std::string_view s) {
    if (s.empty() || s.size() > 100) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

std::size_t query_size(const HttpRequest& r, const char* key, std::size_t fallback) {
    auto it = r.query.find(key);
    if (it == r.query.end() || it->second.empty()) return fallback;
    char* end = nullptr;
    unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (*end != '\0') http_fail(400, std::string("query parameter '") + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

const std::vector<std::string> kArtifactDirs = {"corpus", "extracts", "ngrams", "rules", "training", "models", "output"};

}  // namespace

struct Service::Impl {
    fs::path root;
    ServiceOptions options;

    std::mutex mu;  // guards everything below
    std::condition_variable idle_cv;
    std::map<std::string, std::unique_ptr<std::mutex>> project_locks;

    struct Job {
        std::string id;
        std::string project;
        std::string tag;
        std::string state = "queued";
        std::string error;
        ordered_json result = nullptr;
    };
    std::map<std::string, std::shared_ptr<Job>> jobs;
    std::map<std::string, std::string> request_jobs;   // project/request_id -> job id
    std::map<std::string, ordered_json> request_cache;  // project/request_id -> export response
    std::vector<std::thread> threads;
    std::size_t running = 0;
    std::size_t next_job = 0;

    struct NgramCacheEntry {
        std::string key;
        NgramReport report;
    };
    std::map<std::string, NgramCacheEntry> ngram_cache;  // project/tag -> last report

    std::mutex& project_lock(const std::string& id) {
        std::lock_guard<std::mutex> g(mu);
        auto& p = project_locks[id];
        if (!p) p = std::make_unique<std::mutex>();
        return *p;
    }

    // ---- projects ------------------------------------------------------------

    std::vector<std::string> project_ids() const {
        std::vector<std::string> out;
        if (!fs::is_directory(root)) return out;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory() && fs::exists(e.path() / "craml.json")) out.push_back(e.path().filename().string());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    ProjectConfig config(const std::string& id) const {
        if (!safe_name(id) || !fs::exists(root / id / "craml.json")) http_fail(404, "unknown project '" + id + "'");
        return ProjectConfig::load(root / id / "craml.json");
    }

    std::vector<std::pair<std::string, std::uintmax_t>> artifacts(const fs::path& project) const {
        std::vector<std::pair<std::string, std::uintmax_t>> out;
        for (const auto& d : kArtifactDirs) {
            if (!fs::is_directory(project / d)) continue;
            for (const auto& e : fs::recursive_directory_iterator(project / d)) {
                if (e.is_regular_file()) out.emplace_back(e.path().lexically_relative(project).generic_string(), e.file_size());
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<fs::path> extract_files(const ProjectConfig& c, const std::string& tag) const {
        auto dir = c.project / "extracts" / tag;
        std::vector<fs::path> files;
        if (fs::is_directory(dir)) files = list_extract_files(dir);
        if (files.empty()) http_fail(409, "project has no extracts for tag '" + tag + "'; run the extract step first");
        return files;
    }

    std::string default_tag(const ProjectConfig& c, const HttpRequest& r) const {
        auto it = r.query.find("tag");
        if (it != r.query.end() && !it->second.empty()) return it->second;
        if (!fs::exists(c.keywords)) http_fail(409, "keyword config " + c.keywords.string() + " does not exist");
        KeywordConfig k = KeywordConfig::load(c.keywords);
        if (k.tags().empty()) http_fail(409, "keyword config defines no tags");
        return k.tags().front().tag;
    }

    // ---- handlers ------------------------------------------------------------

    HttpResponse list_projects() {
        ordered_json out = ordered_json::array();
        for (const auto& id : project_ids()) {
            ordered_json p;
            p["id"] = id;
            try {
                ProjectConfig c = config(id);
                auto rec = recorded_artifacts(c.project);
                std::vector<std::string> done;
                for (const auto& s : kPipelineSteps) {
                    if (rec.count(s)) done.push_back(s);
                }
                p["completed_steps"] = done;
            } catch (const std::exception& e) {
                p["error"] = e.what();
            }
            out.push_back(p);
        }
        return json_response({{"projects", out}});
    }

    HttpResponse list_artifacts(const std::string& id) {
        ProjectConfig c = config(id);
        ordered_json out = ordered_json::array();
        for (const auto& [p, size] : artifacts(c.project)) out.push_back({{"path", p}, {"bytes", size}});
        return json_response({{"project", id}, {"artifacts", out}});
    }

    HttpResponse get_artifact(const std::string& id, const std::vector<std::string>& parts, const HttpRequest& r) {
        ProjectConfig c = config(id);
        fs::path rel;
        for (const auto& p : parts) {
            if (p == ".." || p == ".") http_fail(400, "invalid artifact path");
            rel /= p;
        }
        if (parts.empty() || std::find(kArtifactDirs.begin(), kArtifactDirs.end(), parts[0]) == kArtifactDirs.end()) {
            http_fail(404, "unknown artifact '" + rel.generic_string() + "'");
        }
        fs::path file = c.project / rel;
        if (!fs::is_regular_file(file)) http_fail(404, "unknown artifact '" + rel.generic_string() + "'");
        std::string ext = file.extension().string();
        bool wants_json = r.accept.find("application/json") != std::string::npos &&
                          r.accept.find("text/csv") == std::string::npos;
        if (ext == ".csv" && wants_json) {
            csv::Table t = csv::read_table(file, {.delimiter = ','});
            ordered_json prov = ordered_json::object();
            for (const auto& [k, v] : t.provenance.fields) prov[k] = v;
            return json_response({{"path", rel.generic_string()},
                                  {"artifact", t.provenance.artifact},
                                  {"provenance", prov},
                                  {"header", t.header},
                                  {"rows", t.rows}});
        }
        std::string type = ext == ".csv" ? "text/csv" : ext == ".json" ? "application/json" : "application/octet-stream";
        return {200, type, read_file(file)};
    }

    HttpResponse ngrams(const std::string& id, const HttpRequest& r) {
        ProjectConfig c = config(id);
        std::string tag = default_tag(c, r);
        std::size_t n = query_size(r, "n", c.ngram_n);
        if (n < 1) http_fail(400, "n must be >= 1");
        std::string center_text = r.query.count("center") ? r.query.at("center") : std::string(to_string(c.ngram_center));
        Centering center = parse_centering(center_text);
        std::size_t limit = query_size(r, "limit", 50);
        auto files = extract_files(c, tag);
        KeywordConfig k = KeywordConfig::load(c.keywords);
        if (!k.has_tag(tag)) http_fail(404, "unknown tag '" + tag + "'");

        std::string key = std::to_string(n) + "|" + std::string(to_string(center));
        for (const auto& f : files) key += "|" + hash_file(f);
        NgramReport report;
        bool cached = false;
        {
            std::lock_guard<std::mutex> g(mu);
            auto it = ngram_cache.find(id + "/" + tag);
            if (it != ngram_cache.end() && it->second.key == key) {
                report = it->second.report;
                cached = true;
            }
        }
        if (!cached) {
            report = ngram_explore(files, n, center, k.keywords_for(tag), options.jobs);
            std::lock_guard<std::mutex> g(mu);
            ngram_cache[id + "/" + tag] = {key, report};
        }
        ordered_json rows = ordered_json::array();
        for (std::size_t i = 0; i < report.rows.size() && i < limit; ++i) {
            rows.push_back({{"ngram", report.rows[i].ngram}, {"count", report.rows[i].count}});
        }
        return json_response({{"tag", tag},
                              {"n", n},
                              {"center", to_string(center)},
                              {"windows", report.windows},
                              {"distinct", report.rows.size()},
                              {"cached", cached},
                              {"rows", rows}});
    }

    static HttpResponse rules_error(const RuleSetError& e) {
        ordered_json errs = ordered_json::array();
        for (const auto& x : e.errors()) errs.push_back({{"line", x.line}, {"message", x.message}});
        return json_response({{"error", e.what()}, {"errors", errs}}, 422);
    }

    HttpResponse preview(const std::string& id, const HttpRequest& r) {
        ProjectConfig c = config(id);
        json body = parse_body(r);
        std::string text = body_value<std::string>(body, "rules", "");
        std::size_t limit = body_value<std::size_t>(body, "limit", 20);
        if (limit > options.max_preview_limit) {
            http_fail(422, "limit must be <= " + std::to_string(options.max_preview_limit));
        }
        std::size_t cap = std::min(body_value<std::size_t>(body, "sample", options.preview_cap), options.preview_cap);
        RuleSet rs = RuleSet::parse(text, "<preview>");
        KeywordConfig k = KeywordConfig::load(c.keywords);
        std::string tag;
        for (const auto& t : rs.tags()) {
            if (k.has_tag(t)) {
                tag = t;
                break;
            }
        }
        if (tag.empty()) http_fail(422, "no rule tag is defined in the keyword config");
        auto files = extract_files(c, tag);

        std::vector<ChunkRow> rows;
        std::vector<std::string> chunks;
        for (const auto& f : files) {
            if (chunks.size() >= cap) break;
            ExtractFile ef = read_extract_file(f);
            for (const auto& row : ef.rows) {
                if (chunks.size() >= cap) break;
                ChunkRow cr{row.doc_id, {}};
                for (const auto& ch : row.chunks) {
                    if (chunks.size() >= cap) break;
                    chunks.push_back(ch);
                    cr.chunks.push_back(ch);
                }
                rows.push_back(std::move(cr));
            }
        }
        RuleCoverage cov = rule_coverage(rs, chunks);
        ordered_json rules = ordered_json::array();
        for (std::size_t i = 0; i < rs.rules().size(); ++i) {
            const Rule& rule = rs.rules()[i];
            ordered_json examples = ordered_json::array();
            for (const auto& ch : chunks) {
                if (examples.size() >= limit) break;
                if (!rule.matches(ch)) continue;
                RuleOutcome o = apply_rules(ch, rs);
                ordered_json values = ordered_json::object();
                for (std::size_t t = 0; t < rs.tags().size(); ++t) values[rs.tags()[t]] = o.value(t);
                examples.push_back({{"chunk", ch}, {"values", values}, {"winner", o.winner ? o.winner->display() : ""}});
            }
            rules.push_back({{"rule", rule.display()},
                             {"prio", rule.prio},
                             {"line", rule.line},
                             {"matches", cov.matches[i]},
                             {"wins", cov.wins[i]},
                             {"examples", examples}});
        }
        ExtrapolateOptions eo;
        TrainingSet ts = extrapolate_rows(rows, rs, eo);
        ordered_json positives = ordered_json::object();
        for (std::size_t t = 0; t < ts.tags.size(); ++t) {
            std::size_t n = 0;
            for (const auto& row : ts.rows) n += row.values[t];
            positives[ts.tags[t]] = n;
        }
        return json_response({{"tag", tag},
                              {"chunks", cov.chunks},
                              {"unmatched", cov.unmatched},
                              {"capped", chunks.size() >= cap},
                              {"rules", rules},
                              {"training_preview", {{"rows", ts.rows.size()}, {"positives", positives}}}});
    }

    HttpResponse save_rules(const std::string& id, const std::string& name, const HttpRequest& r) {
        ProjectConfig c = config(id);
        if (!safe_name(name)) http_fail(400, "rule file name may only contain letters, digits, '_' and '-'");
        std::string text = r.body;
        if (!trim(text).empty() && trim(text).front() == '{') text = body_value<std::string>(parse_body(r), "rules", "");
        RuleSet rs = RuleSet::parse(text, name + ".csv");
        std::lock_guard<std::mutex> g(project_lock(id));
        fs::path path = c.project / "rules" / (name + ".csv");
        write_file(path, text);
        return json_response({{"path", path.lexically_relative(c.project).generic_string()},
                              {"rules", rs.rules().size()},
                              {"tags", rs.tags()},
                              {"hash", rs.content_hash()}});
    }

    fs::path training_file(const ProjectConfig& c, const std::string& name) const {
        if (!name.empty()) {
            if (!safe_name(name)) http_fail(400, "invalid training set name");
            fs::path p = c.project / "training" / (name + ".csv");
            if (!fs::exists(p)) http_fail(409, "no training set '" + name + "'; run the extrapolate step first");
            return p;
        }
        std::vector<fs::path> found;
        if (fs::is_directory(c.project / "training")) {
            for (const auto& e : fs::directory_iterator(c.project / "training")) {
                if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
            }
        }
        std::sort(found.begin(), found.end());
        if (found.empty()) http_fail(409, "project has no training set; run the extrapolate step first");
        return found.front();
    }

    HttpResponse validation_export(const std::string& id, const HttpRequest& r) {
        ProjectConfig c = config(id);
        json body = parse_body(r);
        std::string request_id = body_value<std::string>(body, "request_id", "");
        if (!request_id.empty()) {
            std::lock_guard<std::mutex> g(mu);
            auto it = request_cache.find(id + "/" + request_id);
            if (it != request_cache.end()) return json_response(it->second);
        }
        fs::path training = training_file(c, body_value<std::string>(body, "training", ""));
        if (!body.contains("seed")) http_fail(400, "field 'seed' is required");
        auto seed = body_value<std::uint64_t>(body, "seed", 0);
        auto per_rule = body_value<std::size_t>(body, "per_rule", c.validate_per_rule);
        auto boost = body_value<double>(body, "positive_boost", c.positive_boost);

        std::lock_guard<std::mutex> g(project_lock(id));
        TrainingSet set = read_training(training);
        ValidationSample s = make_validation_sample(set, per_rule, boost, seed);
        auto dir = c.project / "training" / "validation";
        std::string stem = training.stem().string();
        write_validation_sample(s, dir / (stem + "_coder.csv"), dir / (stem + "_key.csv"));
        ordered_json out = {{"training", stem},
                            {"rows", s.coder_rows.size()},
                            {"coder_file", "training/validation/" + stem + "_coder.csv"},
                            {"coder_csv", coder_file_csv(s)}};
        if (!request_id.empty()) {
            std::lock_guard<std::mutex> g2(mu);
            request_cache[id + "/" + request_id] = out;
        }
        return json_response(out);
    }

    HttpResponse validation_score(const std::string& id, const HttpRequest& r) {
        ProjectConfig c = config(id);
        json body = parse_body(r);
        std::string coded = body_value<std::string>(body, "coded", "");
        if (trim(coded).empty()) http_fail(400, "field 'coded' (coded CSV text) is required");
        fs::path training = training_file(c, body_value<std::string>(body, "training", ""));
        fs::path key = c.project / "training" / "validation" / (training.stem().string() + "_key.csv");
        if (!fs::exists(key)) http_fail(409, "no exported validation sample; call validation/export first");
        ValidationSample k = parse_answer_key(read_file(key));
        AgreementReport rep = score_validation(parse_coded_file(coded), k);
        return {200, "application/json", rep.to_json() + "\n"};
    }

    static ordered_json job_json(const Job& j) {
        return {{"id", j.id}, {"project", j.project}, {"tag", j.tag}, {"state", j.state},
                {"error", j.error.empty() ? ordered_json(nullptr) : ordered_json(j.error)},
                {"result", j.result}};
    }

    HttpResponse start_train(const std::string& id, const HttpRequest& r) {
        ProjectConfig c = config(id);
        json body = parse_body(r);
        std::string request_id = body_value<std::string>(body, "request_id", "");
        if (!request_id.empty()) {
            std::lock_guard<std::mutex> g(mu);
            auto it = request_jobs.find(id + "/" + request_id);
            if (it != request_jobs.end()) return json_response(job_json(*jobs.at(it->second)), 202);
        }
        std::string tag = body_value<std::string>(body, "tag", "");
        if (tag.empty()) http_fail(400, "field 'tag' is required");
        if (!body.contains("seed")) http_fail(400, "field 'seed' is required");

        TrainRequest req;
        req.tag = tag;
        req.seed = body_value<std::uint64_t>(body, "seed", 0);
        bool own_families = body.contains("families") || body.contains("family");
        req.grid = body_value<std::string>(body, "grid", own_families ? "default" : c.grid);
        req.folds = body_value<std::size_t>(body, "folds", c.folds);
        req.purify = body_value<bool>(body, "purify", c.purify);
        req.jobs = options.jobs;
        req.models_dir = c.project / "models";
        if (auto it = c.trim.find(tag); it != c.trim.end()) req.trim = it->second;
        req.families.clear();
        if (body.contains("families")) {
            for (const auto& f : body_value<std::vector<std::string>>(body, "families", {})) {
                req.families.push_back(parse_family(f));
            }
        } else if (body.contains("family")) {
            req.families.push_back(parse_family(body_value<std::string>(body, "family", "")));
        } else {
            req.families = c.families;
        }
        if (req.families.empty()) http_fail(400, "no model family given");
        for (auto f : req.families) parse_grid(f, req.grid);

        // the training set defining this tag
        std::string name = body_value<std::string>(body, "training", "");
        if (name.empty()) {
            for (const auto& rp : c.rules) {
                fs::path p = c.project / "training" / (rp.stem().string() + ".csv");
                if (!fs::exists(p)) continue;
                auto tags = read_training(p).tags;
                if (std::find(tags.begin(), tags.end(), tag) != tags.end()) {
                    req.training = p;
                    break;
                }
            }
            if (req.training.empty()) http_fail(409, "no training set defines tag '" + tag + "'; run extrapolate first");
        } else {
            req.training = training_file(c, name);
        }

        std::lock_guard<std::mutex> g(mu);
        for (const auto& [jid, j] : jobs) {
            if (j->project == id && j->tag == tag && (j->state == "queued" || j->state == "running")) {
                http_fail(409, "a training job for tag '" + tag + "' is already " + j->state, {{"job", jid}});
            }
        }
        auto job = std::make_shared<Job>();
        job->id = "job-" + std::to_string(++next_job);
        job->project = id;
        job->tag = tag;
        jobs[job->id] = job;
        if (!request_id.empty()) request_jobs[id + "/" + request_id] = job->id;
        ++running;
        threads.emplace_back([this, job, req, id] { run_train(job, req, id); });
        return json_response(job_json(*job), 202);
    }

    void run_train(std::shared_ptr<Job> job, TrainRequest req, std::string id) {
        std::mutex& lock = project_lock(id);
        {
            std::lock_guard<std::mutex> project(lock);
            {
                std::lock_guard<std::mutex> g(mu);
                job->state = "running";
            }
            try {
                auto trained = train_models(req);
                record_trained(req.models_dir, req.tag, trained);
                ordered_json models = ordered_json::array();
                for (const auto& t : trained) {
                    models.push_back({{"family", to_string(t.family)},
                                      {"params", params_to_string(t.params)},
                                      {"cv_f1", t.cv_f1},
                                      {"metrics", t.metrics.to_json()},
                                      {"purified", t.purified},
                                      {"model", t.file.filename().string()},
                                      {"selected", t.selected}});
                }
                std::lock_guard<std::mutex> g(mu);
                job->result = {{"models", models}};
                job->state = "done";
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> g(mu);
                job->error = e.what();
                job->state = "failed";
            }
        }
        std::lock_guard<std::mutex> g(mu);
        --running;
        idle_cv.notify_all();
    }

    HttpResponse get_job(const std::string& id, const std::string& job_id) {
        config(id);
        std::lock_guard<std::mutex> g(mu);
        auto it = jobs.find(job_id);
        if (it == jobs.end() || it->second->project != id) http_fail(404, "unknown job '" + job_id + "'");
        return json_response(job_json(*it->second));
    }

    HttpResponse metrics(const std::string& id) {
        ProjectConfig c = config(id);
        ordered_json models = ordered_json::array();
        for (const auto& m : read_metrics_file(c.project / "models/metrics.csv")) {
            ordered_json row = {{"tag", m.tag}, {"family", m.family}, {"params", m.params}, {"cv_f1", m.cv_f1}};
            ordered_json metrics = m.metrics.to_json();
            for (const auto& [k, v] : metrics.items()) row[k] = v;
            row["purified"] = m.purified;
            row["model"] = m.model;
            row["selected"] = m.selected;
            models.push_back(row);
        }
        ordered_json prevalence = ordered_json::array();
        fs::path pp = c.project / "output/prevalence.csv";
        if (fs::exists(pp)) {
            csv::Table t = csv::read_table(pp, {.delimiter = ','});
            for (const auto& r : t.rows) {
                prevalence.push_back({{"tag", r[0]},
                                      {"year", std::stoi(r[1])},
                                      {"records", std::stoull(r[2])},
                                      {"tagged", std::stoull(r[3])},
                                      {"percent", std::stod(r[4])},
                                      {"partial", r[5] == "1"}});
            }
        }
        return json_response({{"project", id}, {"models", models}, {"prevalence", prevalence}});
    }

    HttpResponse dispatch(const HttpRequest& r) {
        auto seg = segments(r.path);
        const std::string& m = r.method;
        if (seg.size() == 1 && seg[0] == "openapi.json" && m == "GET") return {200, "application/json", openapi_json()};
        if (seg.empty() || seg[0] != "projects") http_fail(404, "no route for " + r.path);
        if (seg.size() == 1) {
            if (m != "GET") http_fail(405, "method not allowed");
            return list_projects();
        }
        const std::string& id = seg[1];
        if (seg.size() == 2) {
            if (m != "GET") http_fail(405, "method not allowed");
            ProjectConfig c = config(id);
            return json_response({{"id", id}, {"steps", kPipelineSteps}});
        }
        const std::string& what = seg[2];
        if (what == "artifacts" && m == "GET") {
            if (seg.size() == 3) return list_artifacts(id);
            return get_artifact(id, std::vector<std::string>(seg.begin() + 3, seg.end()), r);
        }
        if (what == "ngrams" && seg.size() == 3 && m == "GET") return ngrams(id, r);
        if (what == "rules" && seg.size() == 4 && seg[3] == "preview" && m == "POST") return preview(id, r);
        if (what == "rules" && seg.size() == 4 && m == "PUT") return save_rules(id, seg[3], r);
        if (what == "validation" && seg.size() == 4 && m == "POST") {
            if (seg[3] == "export") return validation_export(id, r);
            if (seg[3] == "score") return validation_score(id, r);
        }
        if (what == "train" && seg.size() == 3 && m == "POST") return start_train(id, r);
        if (what == "jobs" && seg.size() == 4 && m == "GET") return get_job(id, seg[3]);
        if (what == "metrics" && seg.size() == 3 && m == "GET") return metrics(id);
        config(id);
        http_fail(404, "no route for " + m + " " + r.path);
    }
};

Service::Service(fs::path root, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->root = std::move(root);
    impl_->options = options;
}

Service::~Service() {
    wait_idle();
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> g(impl_->mu);
        threads.swap(impl_->threads);
    }
    for (auto& t : threads) t.join();
}

void Service::wait_idle() {
    std::unique_lock<std::mutex> g(impl_->mu);
    impl_->idle_cv.wait(g, [&] { return impl_->running == 0; });
}

HttpResponse Service::handle(const HttpRequest& request) {
    try {
        return impl_->dispatch(request);
    } catch (const HttpError& e) {
        ordered_json j = {{"error", e.message}};
        if (!e.details.is_null()) j["details"] = e.details;
        return json_response(j, e.status);
    } catch (const RuleSetError& e) {
        return Impl::rules_error(e);
    } catch (const Error& e) {
        int status = 500;
        switch (e.kind()) {
            case ErrorKind::usage: status = 400; break;
            case ErrorKind::data: status = 422; break;
            case ErrorKind::state: status = 409; break;
            case ErrorKind::io: status = 500; break;
        }
        return json_response({{"error", e.what()}}, status);
    } catch (const std::exception& e) {
        return json_response({{"error", e.what()}}, 500);
    }
}

std::string openapi_json() {
    auto op = [](const char* summary, ordered_json responses) {
        return ordered_json{{"summary", summary}, {"responses", std::move(responses)}};
    };
    auto r = [](std::initializer_list<std::pair<const char*, const char*>> codes) {
        ordered_json j = ordered_json::object();
        for (const auto& [c, d] : codes) j[c] = {{"description", d}};
        return j;
    };
    auto id_param = ordered_json{{"name", "id"}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}};
    ordered_json paths;
    paths["/projects"]["get"] = op("List projects", r({{"200", "project list"}}));
    paths["/projects/{id}/artifacts"]["get"] = op("List project artifacts", r({{"200", "artifact list"}, {"404", "unknown project"}}));
    paths["/projects/{id}/artifacts/{path}"]["get"] =
        op("Download an artifact; CSV files are returned as JSON when Accept is application/json",
           r({{"200", "artifact content"}, {"404", "unknown artifact"}}));
    auto ng = op("Top n-grams of the project's extracts (query: tag, n, center=midpoint|keyword, limit)",
                 r({{"200", "n-gram page, count descending"}, {"409", "no extracts"}}));
    paths["/projects/{id}/ngrams"]["get"] = ng;
    paths["/projects/{id}/rules/preview"]["post"] =
        op("Side-effect free rule preview. Body: {rules: csv text, limit <= 500, sample}",
           r({{"200", "per-rule matches, wins and examples"}, {"422", "rule file errors by line"}, {"409", "no extracts"}}));
    paths["/projects/{id}/rules/{name}"]["put"] =
        op("Validate and save a rule file (body: CSV text or {rules})", r({{"200", "saved"}, {"422", "rule file errors"}}));
    paths["/projects/{id}/validation/export"]["post"] =
        op("Blind coding sample. Body: {seed, per_rule, positive_boost, training, request_id}",
           r({{"200", "coder file"}, {"409", "no training set"}}));
    paths["/projects/{id}/validation/score"]["post"] =
        op("Score a coded file against the stored answer key. Body: {coded: csv text, training}",
           r({{"200", "agreement report"}, {"422", "sample ids missing or unknown"}, {"409", "nothing exported"}}));
    paths["/projects/{id}/train"]["post"] =
        op("Start a background training job. Body: {tag, seed, family|families, grid, purify, folds, request_id}",
           r({{"202", "job handle"}, {"409", "a job for this tag is queued or running, or no training set"}}));
    paths["/projects/{id}/jobs/{job}"]["get"] = op("Job state: queued, running, done or failed", r({{"200", "job"}, {"404", "unknown job"}}));
    paths["/projects/{id}/metrics"]["get"] = op("Per-tag, per-family metrics and prevalence series", r({{"200", "metrics"}}));
    for (auto& [p, v] : paths.items()) {
        if (p != "/projects") {
            for (auto& [m, o] : v.items()) o["parameters"] = ordered_json::array({id_param});
        }
    }
    ordered_json doc = {{"openapi", "3.0.3"},
                        {"info", {{"title", "craml service"}, {"version", tool_version()}}},
                        {"paths", paths}};
    return doc.dump(2) + "\n";
}

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query[k] = v;
        r.body = req.body;
        r.accept = req.get_header_value("Accept");
        HttpResponse out = service.handle(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    if (!server.listen(host, port)) fail_io("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace craml
