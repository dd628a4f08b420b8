#include <gtest/gtest.h>

#include <json.hpp>

#include "craml/pipeline.hpp"
#include "craml/service.hpp"
#include "craml/synthetic.hpp"
#include "craml/util.hpp"
#include "craml/validation.hpp"
#include "reference.hpp"

#include <chrono>
#include <thread>

using namespace craml;
using craml::testing::TempDir;
using craml::testing::write_text;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
protected:
    static inline std::unique_ptr<TempDir> root;

    static void SetUpTestSuite() {
        root = std::make_unique<TempDir>();
        auto dir = root->path() / "demo";
        SyntheticOptions opts;
        opts.documents = 120;
        opts.seed = 6;
        generate_synthetic(dir, opts);
        auto j = json::parse(synthetic_project_config(6));
        j["train"]["grid"] = "trees=10,depth=none";
        j["train"]["folds"] = 3;
        write_text(dir / "craml.json", j.dump(2));
        run_pipeline(ProjectConfig::load(dir / "craml.json"), {{"ingest", "extract", "ngrams", "extrapolate"}, false, nullptr});
        std::filesystem::create_directories(root->path() / "empty");
        write_text(root->path() / "empty/craml.json", synthetic_project_config(1));
    }

    static void TearDownTestSuite() { root.reset(); }

    Service service{root->path()};

    HttpResponse call(const std::string& method, const std::string& path, const std::string& body = "",
                      std::map<std::string, std::string> query = {}, const std::string& accept = "") {
        return service.handle({method, path, std::move(query), body, accept});
    }

    static json parse(const HttpResponse& r) { return json::parse(r.body); }
};

}  // namespace

TEST_F(ServiceTest, OpenApiDescribesEveryRoute) {
    auto r = call("GET", "/openapi.json");
    ASSERT_EQ(r.status, 200);
    auto j = parse(r);
    EXPECT_EQ(j["openapi"], "3.0.3");
    for (const auto& p : {"/projects", "/projects/{id}/ngrams", "/projects/{id}/rules/preview",
                          "/projects/{id}/rules/{name}", "/projects/{id}/validation/export",
                          "/projects/{id}/validation/score", "/projects/{id}/train", "/projects/{id}/jobs/{job}",
                          "/projects/{id}/metrics", "/projects/{id}/artifacts"}) {
        EXPECT_TRUE(j["paths"].contains(p)) << p;
    }
}

TEST_F(ServiceTest, ListsProjectsWithCompletedSteps) {
    auto j = parse(call("GET", "/projects"));
    ASSERT_EQ(j["projects"].size(), 2u);
    EXPECT_EQ(j["projects"][0]["id"], "demo");
    EXPECT_EQ(j["projects"][0]["completed_steps"],
              json::array({"ingest", "extract", "ngrams", "extrapolate"}));
    EXPECT_EQ(call("GET", "/projects/demo").status, 200);
    EXPECT_EQ(call("GET", "/projects/nope").status, 404);
    EXPECT_EQ(call("GET", "/projects/..").status, 404);
    EXPECT_EQ(call("POST", "/projects").status, 405);
    EXPECT_EQ(call("GET", "/elsewhere").status, 404);
}

TEST_F(ServiceTest, ArtifactsAsRawCsvOrJson) {
    auto list = parse(call("GET", "/projects/demo/artifacts"));
    bool has_training = false;
    for (const auto& a : list["artifacts"]) has_training |= a["path"] == "training/nopoach.csv";
    EXPECT_TRUE(has_training);
    auto raw = call("GET", "/projects/demo/artifacts/training/nopoach.csv");
    EXPECT_EQ(raw.status, 200);
    EXPECT_EQ(raw.content_type, "text/csv");
    EXPECT_EQ(raw.body.rfind("# craml", 0), 0u);
    auto as_json = parse(call("GET", "/projects/demo/artifacts/training/nopoach.csv", "", {}, "application/json"));
    EXPECT_EQ(as_json["artifact"], "training");
    EXPECT_EQ(as_json["header"][0], "id");
    EXPECT_GT(as_json["rows"].size(), 0u);
    EXPECT_EQ(call("GET", "/projects/demo/artifacts/../craml.json").status, 400);
    EXPECT_EQ(call("GET", "/projects/demo/artifacts/documents/x.txt").status, 404);
    EXPECT_EQ(call("GET", "/projects/demo/artifacts/training/missing.csv").status, 404);
}

TEST_F(ServiceTest, NgramsAreCachedAndLimited) {
    auto first = parse(call("GET", "/projects/demo/ngrams", "", {{"n", "2"}, {"limit", "5"}}));
    EXPECT_EQ(first["tag"], "nopoach");
    EXPECT_LE(first["rows"].size(), 5u);
    EXPECT_FALSE(first["cached"].get<bool>());
    auto second = parse(call("GET", "/projects/demo/ngrams", "", {{"n", "2"}, {"limit", "5"}}));
    EXPECT_TRUE(second["cached"].get<bool>());
    EXPECT_EQ(first["rows"], second["rows"]);
    EXPECT_EQ(call("GET", "/projects/demo/ngrams", "", {{"n", "0"}}).status, 400);
    EXPECT_EQ(call("GET", "/projects/demo/ngrams", "", {{"n", "x"}}).status, 400);
    EXPECT_EQ(call("GET", "/projects/demo/ngrams", "", {{"center", "sideways"}}).status, 400);
    EXPECT_EQ(call("GET", "/projects/empty/ngrams").status, 409);
}

TEST_F(ServiceTest, RulePreviewReportsCoverageAndTrainingPreview) {
    json body = {{"rules", read_file(root->path() / "demo/rules/nopoach.csv")}, {"limit", 3}};
    auto r = call("POST", "/projects/demo/rules/preview", body.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    auto j = parse(r);
    EXPECT_GT(j["chunks"].get<int>(), 0);
    ASSERT_GT(j["rules"].size(), 0u);
    for (const auto& rule : j["rules"]) EXPECT_LE(rule["examples"].size(), 3u);
    EXPECT_GT(j["training_preview"]["rows"].get<int>(), 0);

    json bad = {{"rules", "rule,prio,nopoach\nhire,0,0\nshall not hire,x,1\n"}};
    auto e = call("POST", "/projects/demo/rules/preview", bad.dump());
    EXPECT_EQ(e.status, 422);
    EXPECT_EQ(parse(e)["errors"][0]["line"], 3);
    json too_many = {{"rules", body["rules"]}, {"limit", 100000}};
    EXPECT_EQ(call("POST", "/projects/demo/rules/preview", too_many.dump()).status, 422);
    EXPECT_EQ(call("POST", "/projects/demo/rules/preview", "{not json").status, 400);
}

TEST_F(ServiceTest, SavingRulesValidatesFirst) {
    auto ok = call("PUT", "/projects/demo/rules/draft", "rule,prio,nopoach\nhire,0,0\nshall not hire,1,1\n");
    ASSERT_EQ(ok.status, 200) << ok.body;
    EXPECT_EQ(parse(ok)["path"], "rules/draft.csv");
    EXPECT_TRUE(std::filesystem::exists(root->path() / "demo/rules/draft.csv"));
    EXPECT_EQ(call("PUT", "/projects/demo/rules/bad", "rule,prio,nopoach\n").status, 422);
    EXPECT_FALSE(std::filesystem::exists(root->path() / "demo/rules/bad.csv"));
    EXPECT_EQ(call("PUT", "/projects/demo/rules/..%2Fx", "rule,prio,t\nhire,0,0\n").status, 400);
    std::filesystem::remove(root->path() / "demo/rules/draft.csv");
}

TEST_F(ServiceTest, ValidationExportThenScore) {
    EXPECT_EQ(call("POST", "/projects/demo/validation/export", "{}").status, 400);
    EXPECT_EQ(call("POST", "/projects/empty/validation/export", R"({"seed": 1})").status, 409);
    auto r = call("POST", "/projects/demo/validation/export", R"({"seed": 3, "per_rule": 4, "request_id": "abc"})");
    ASSERT_EQ(r.status, 200) << r.body;
    auto j = parse(r);
    EXPECT_GT(j["rows"].get<int>(), 0);
    auto again = parse(call("POST", "/projects/demo/validation/export", R"({"seed": 99, "request_id": "abc"})"));
    EXPECT_EQ(again, j);

    std::string key = read_file(root->path() / "demo/training/validation/nopoach_key.csv");
    auto table = craml::parse_answer_key(key);
    std::string coded = "sample_id,nopoach\n";
    for (const auto& k : table.key_rows) coded += k.sample_id + "," + std::to_string(k.values[0]) + "\n";
    auto s = call("POST", "/projects/demo/validation/score", json({{"coded", coded}}).dump());
    ASSERT_EQ(s.status, 200) << s.body;
    EXPECT_EQ(parse(s)["chunk_agreement"], 1.0);
    auto missing = call("POST", "/projects/demo/validation/score", json({{"coded", "sample_id,nopoach\nzz,1\n"}}).dump());
    EXPECT_EQ(missing.status, 422);
    EXPECT_EQ(call("POST", "/projects/demo/validation/score", "{}").status, 400);
}

TEST_F(ServiceTest, TrainingRunsAsABackgroundJob) {
    EXPECT_EQ(call("POST", "/projects/demo/train", R"({"tag": "nopoach"})").status, 400);
    EXPECT_EQ(call("POST", "/projects/demo/train", R"({"seed": 1})").status, 400);
    EXPECT_EQ(call("POST", "/projects/demo/train", R"({"tag": "nopoach", "seed": 1, "family": "xx"})").status, 400);
    EXPECT_EQ(call("POST", "/projects/demo/train", R"({"tag": "other", "seed": 1})").status, 409);

    auto r = call("POST", "/projects/demo/train", R"({"tag": "nopoach", "seed": 2, "family": "nb", "request_id": "t1"})");
    ASSERT_EQ(r.status, 202) << r.body;
    std::string job = parse(r)["id"];
    auto replay = call("POST", "/projects/demo/train", R"({"tag": "nopoach", "seed": 2, "request_id": "t1"})");
    EXPECT_EQ(replay.status, 202);
    EXPECT_EQ(parse(replay)["id"], job);
    service.wait_idle();
    auto status = parse(call("GET", "/projects/demo/jobs/" + job));
    EXPECT_EQ(status["state"], "done") << status.dump();
    EXPECT_EQ(status["result"]["models"].size(), 1u);
    EXPECT_EQ(call("GET", "/projects/demo/jobs/job-999").status, 404);

    auto m = parse(call("GET", "/projects/demo/metrics"));
    ASSERT_GE(m["models"].size(), 1u);
    EXPECT_EQ(m["models"][0]["tag"], "nopoach");
    EXPECT_TRUE(m["models"][0].contains("f1"));
}

TEST_F(ServiceTest, ConcurrentTrainForSameTagIsRejected) {
    std::string body = R"({"tag": "nopoach", "seed": 4, "family": "rf", "grid": "trees=60,depth=none"})";
    auto a = call("POST", "/projects/demo/train", body);
    ASSERT_EQ(a.status, 202);
    auto b = call("POST", "/projects/demo/train", body);
    auto state = parse(call("GET", "/projects/demo/jobs/" + parse(a)["id"].get<std::string>()))["state"];
    if (state == "queued" || state == "running") {
        EXPECT_EQ(b.status, 409);
        EXPECT_EQ(parse(b)["details"]["job"], parse(a)["id"]);
    }
    service.wait_idle();
}
