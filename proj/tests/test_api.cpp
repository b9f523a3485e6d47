#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "support/test_support.hpp"
#include "tom/api.hpp"

namespace tom {
namespace {

using testkit::TempDir;

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli_dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<Json> json_lines(const std::string& text) {
    std::vector<Json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(Json::parse(line));
    }
    return out;
}

/// Drops wall-clock fields, which legitimately differ between two runs.
Json strip_times(Json j) {
    if (j.is_object()) {
        for (const char* k : {"created_at", "recorded_at", "fetched_at"}) j.erase(k);
        for (auto& [k, v] : j.items()) v = strip_times(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_times(v);
    }
    return j;
}

std::string golden(const std::string& name) { return (testkit::kDataDir / "golden" / (name + ".json")).string(); }
std::string fixtures() { return (testkit::kDataDir / "fixtures").string(); }

// ---------------------------------------------------------------------------
// CLI

class CliTest : public ::testing::Test {
protected:
    TempDir dir;
    std::string store = (dir / "store.jsonl").string();

    CliRun tom(std::vector<std::string> args) {
        args.insert(args.begin(), {"--store", store, "--fixture-dir", fixtures()});
        return run_cli(std::move(args));
    }
};

TEST_F(CliTest, ScoreWheelPrintsComposite60) {
    ASSERT_EQ(tom({"init"}).code, 0);
    ASSERT_EQ(tom({"add-iu", "--id", "wheel", "--name", "Wheel"}).code, 0);
    const auto r = tom({"score", "--iu", "wheel", "--file", golden("wheel"), "--note", "initial"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("composite 60"), std::string::npos) << r.out;
}

TEST_F(CliTest, ScoreWithMissingCriterionListsViolations) {
    tom({"init"});
    tom({"add-iu", "--id", "wheel", "--name", "Wheel"});
    const auto r = tom({"score", "--iu", "wheel", "--file", golden("missing_counterfactual")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("missing criterion: counterfactual_impact"), std::string::npos) << r.err;
    EXPECT_EQ(tom({"history", "--iu", "wheel"}).out, "");
}

TEST_F(CliTest, RankOnEmptyStore) {
    tom({"init"});
    const auto r = tom({"rank"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(tom({"score", "--iu", "wheel"}).code, 2);
    EXPECT_EQ(tom({"whatif", "--iu", "wheel", "--criterion", "uniqueness", "--level", "five"}).code, 2);
}

TEST_F(CliTest, DomainErrorsExitOne) {
    EXPECT_EQ(tom({"rank"}).code, 1);  // store not initialized
    tom({"init"});
    EXPECT_EQ(tom({"history", "--iu", "zeppelin"}).code, 1);
    EXPECT_EQ(tom({"add-iu", "--id", "The Wheel!", "--name", "x"}).code, 1);
    const auto r = tom({"--machine", "history", "--iu", "zeppelin"});
    EXPECT_EQ(json_lines(r.err).at(0)["error"]["code"], "not_found");
}

TEST_F(CliTest, FullWorkflow) {
    tom({"init"});
    tom({"add-iu", "--id", "wheel", "--name", "Wheel", "--description", "Round."});
    tom({"add-iu", "--id", "www", "--name", "World Wide Web", "--tag", "ai-related"});
    tom({"add-iu", "--id", "communism", "--name", "Communism"});
    for (const char* id : {"wheel", "www", "communism"}) {
        ASSERT_EQ(tom({"score", "--iu", id, "--file", golden(id == std::string("www") ? "www" : id)}).code, 0);
    }
    const auto rank = json_lines(tom({"--machine", "rank"}).out);
    ASSERT_EQ(rank.size(), 3u);
    EXPECT_EQ(rank[0], (Json{{"iu_id", "www"}, {"composite", 70}}));
    EXPECT_EQ(rank[2]["iu_id"], "wheel");

    const auto w = json_lines(
        tom({"--machine", "whatif", "--iu", "wheel", "--criterion", "immediacy_of_impact", "--level", "5"}).out);
    EXPECT_EQ(w.at(0)["composite"], 73);
    EXPECT_EQ(w.at(0)["delta"], 13);

    const auto tai = json_lines(tom({"--machine", "tai", "--iu", "www"}).out).at(0);
    EXPECT_FALSE(tai["flagged"].get<bool>());  // immediacy 1
    EXPECT_TRUE(tai["tag_ok"].get<bool>());

    EXPECT_EQ(tom({"--machine", "ingest", "--title", "World Wide Web", "--iu", "www"}).code, 0);
    EXPECT_EQ(tom({"ingest", "--title", "Communism"}).code, 0);
    EXPECT_EQ(tom({"ingest", "--title", "No Such Page Xyz"}).code, 1);

    const auto out_path = (dir / "dataset.tsv").string();
    const auto exp = tom({"export", "--out", out_path});
    EXPECT_EQ(exp.code, 0) << exp.err;
    EXPECT_NE(exp.out.find("wrote 3 rows"), std::string::npos);

    const auto stability = json_lines(tom({"--machine", "stability", "--noise-p", "0", "--trials", "10"}).out).at(0);
    for (const auto& e : stability["entries"]) EXPECT_EQ(e["probability"], 1.0);

    const auto hist = json_lines(tom({"--machine", "history", "--iu", "wheel"}).out);
    ASSERT_EQ(hist.size(), 1u);
    EXPECT_EQ(hist[0]["composite"], 60);
}

TEST_F(CliTest, ExpectRevisionConflict) {
    tom({"init"});
    tom({"add-iu", "--id", "wheel", "--name", "Wheel"});
    EXPECT_EQ(tom({"score", "--iu", "wheel", "--file", golden("wheel"), "--expect-revision", "0"}).code, 0);
    const auto r = tom({"--machine", "score", "--iu", "wheel", "--file", golden("wheel"), "--expect-revision", "0"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(json_lines(r.err).at(0)["error"]["code"], "conflict");
}

TEST_F(CliTest, CriteriaListsAllAnchors) {
    const auto lines = json_lines(run_cli({"--machine", "criteria"}).out);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[1]["anchors"][0]["text"], "The IU has had minimal economic impact.");
}

TEST_F(CliTest, EnvironmentAndConfigResolution) {
    const auto cfg = dir / "tom.conf";
    std::ofstream(cfg) << "# test config\nstore.path = " << (dir / "from-config.jsonl").string()
                       << "\ntai.composite_min = 60\ntai.require_ai_tag = false\n";
    ::setenv("TOM_CONFIG", cfg.string().c_str(), 1);
    EXPECT_EQ(run_cli({"init"}).code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "from-config.jsonl"));
    ::setenv("TOM_STORE", (dir / "from-env.jsonl").string().c_str(), 1);
    EXPECT_EQ(run_cli({"init"}).code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "from-env.jsonl"));
    // flag beats env
    EXPECT_EQ(run_cli({"--store", (dir / "from-flag.jsonl").string(), "init"}).code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "from-flag.jsonl"));

    // config thresholds reach tai_flag: untagged wheel at 60 flags with immediacy_min 1
    std::ofstream(cfg, std::ios::app) << "tai.immediacy_min = 1\n";
    run_cli({"add-iu", "--id", "wheel", "--name", "Wheel"});
    run_cli({"score", "--iu", "wheel", "--file", golden("wheel")});
    EXPECT_TRUE(json_lines(run_cli({"--machine", "tai", "--iu", "wheel"}).out).at(0)["flagged"].get<bool>());
    ::unsetenv("TOM_STORE");
    ::unsetenv("TOM_CONFIG");
}

TEST_F(CliTest, BadConfigIsDomainError) {
    const auto cfg = dir / "bad.conf";
    std::ofstream(cfg) << "tai.bogus = 1\n";
    EXPECT_EQ(run_cli({"--config", cfg.string(), "init"}).code, 1);
}

TEST(ConfigParsing, KeysAndComments) {
    const auto values = parse_config_text("a.b = 1 # trailing\n\n# whole line\nc = \"quoted\"\n");
    EXPECT_EQ(values.at("a.b"), "1");
    EXPECT_EQ(values.at("c"), "quoted");
    EXPECT_THROW(parse_config_text("novalue\n"), Error);
    AppConfig c;
    apply_config(c, {{"stability.noise_p", "0.25"}, {"stability.seed", "99"}, {"ingest.backoff_ms", "250"}});
    EXPECT_DOUBLE_EQ(c.stability.noise.p, 0.25);
    EXPECT_EQ(c.stability.seed, 99u);
    EXPECT_EQ(c.ingest.backoff_initial.count(), 250);
    EXPECT_THROW(apply_config(c, {{"tai.immediacy_min", "9"}}), Error);
    EXPECT_THROW(apply_config(c, {{"server.port", "80x"}}), Error);
}

TEST(ErrorMapping, CodesMapToHttpStatus) {
    EXPECT_EQ(http_status(ErrorCode::InvalidInput), 422);
    EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
    EXPECT_EQ(http_status(ErrorCode::Conflict), 409);
    EXPECT_EQ(http_status(ErrorCode::UpstreamUnavailable), 502);
    EXPECT_EQ(http_status(ErrorCode::Internal), 500);
}

// ---------------------------------------------------------------------------
// HTTP

class HttpTest : public ::testing::Test {
protected:
    TempDir dir;
    AppConfig config;
    std::unique_ptr<HttpService> service;
    std::unique_ptr<httplib::Client> client;

    void SetUp() override {
        config.store_path = dir / "store.jsonl";
        config.ingest.fixture_dir = fixtures();
        service = std::make_unique<HttpService>(config, StoreOptions{testkit::stepping_clock()});
        const int port = service->start("127.0.0.1", 0);
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    void TearDown() override { service->stop(); }

    std::pair<int, Json> get(const std::string& path) {
        auto res = client->Get(path);
        EXPECT_TRUE(res);
        return {res->status, res->body.empty() ? Json() : Json::parse(res->body)};
    }

    std::pair<int, Json> post(const std::string& path, const std::string& body) {
        auto res = client->Post(path, body, "application/json");
        EXPECT_TRUE(res);
        return {res->status, Json::parse(res->body)};
    }

    std::string read_card(const std::string& name) { return testkit::slurp(golden(name)); }
};

TEST_F(HttpTest, Health) { EXPECT_EQ(get("/health"), (std::pair<int, Json>{200, Json{{"status", "ok"}}})); }

TEST_F(HttpTest, CriteriaServeVerbatimAnchors) {
    const auto [status, body] = get("/criteria");
    EXPECT_EQ(status, 200);
    ASSERT_EQ(body.size(), 6u);
    EXPECT_EQ(body[0]["key"], "superseedness");
    EXPECT_EQ(body[0]["anchors"][4]["text"], std::string(anchor_text(Criterion::Superseedness, 5)));
}

TEST_F(HttpTest, IuAndRevisionLifecycle) {
    EXPECT_EQ(post("/ius", R"({"id":"wheel","name":"Wheel","tags":["retired"]})").first, 201);
    auto [status, rev] = post("/ius/wheel/revisions", read_card("wheel"));
    EXPECT_EQ(status, 201);
    EXPECT_EQ(rev["revision_no"], 1);
    EXPECT_EQ(rev["composite"], 60);

    const auto [s2, iu] = get("/ius/wheel");
    EXPECT_EQ(s2, 200);
    EXPECT_EQ(iu["latest"]["revision_no"], 1);
    EXPECT_EQ(get("/ius/wheel/revisions").second.size(), 1u);
    EXPECT_EQ(get("/ius").second.size(), 1u);
    EXPECT_EQ(get("/rank").second, Json::parse(R"([{"iu_id":"wheel","composite":60}])"));

    const auto [s3, w] = get("/ius/wheel/whatif?criterion=immediacy_of_impact&level=5");
    EXPECT_EQ(s3, 200);
    EXPECT_EQ(w["composite"], 73);
    EXPECT_EQ(w["delta"], 13);
    const auto [s4, w2] = get("/ius/wheel/whatif?criterion=uniqueness&level=4&base=5,5,5,5,5,5");
    EXPECT_EQ(s4, 200);
    EXPECT_EQ(w2["composite"], 97);
    EXPECT_EQ(w2["delta"], -3);

    EXPECT_EQ(get("/ius/wheel/tai").second["flagged"], false);
}

TEST_F(HttpTest, ErrorStatuses) {
    EXPECT_EQ(get("/ius/zeppelin").first, 404);
    EXPECT_EQ(get("/ius/zeppelin").second["error"]["code"], "not_found");
    EXPECT_EQ(post("/ius", R"({"id":"The Wheel!","name":"x"})").first, 422);
    EXPECT_EQ(post("/ius", "{not json").first, 422);
    post("/ius", R"({"id":"wheel","name":"Wheel"})");
    EXPECT_EQ(get("/ius/wheel/tai").first, 404);  // unscored
    EXPECT_EQ(get("/ius/wheel/whatif?criterion=uniqueness&level=5").first, 404);
    post("/ius/wheel/revisions", read_card("wheel"));
    EXPECT_EQ(get("/ius/wheel/whatif?criterion=uniqueness&level=9").first, 422);
    EXPECT_EQ(get("/ius/wheel/whatif?criterion=charisma&level=2").first, 422);
    EXPECT_EQ(get("/ius/wheel/whatif?criterion=uniqueness").first, 422);
    EXPECT_EQ(post("/ius/wheel/revisions", R"({"scores":{},"expected_revision_no":0})").first, 422);
    const auto [s, conflict] = post("/ius/wheel/revisions",
                                    R"({"scores":{"superseedness":5,"economic_impact":5,"centralization":1,)"
                                    R"("immediacy_of_impact":1,"uniqueness":5,"counterfactual_impact":1},)"
                                    R"("expected_revision_no":0})");
    EXPECT_EQ(s, 409);
    EXPECT_EQ(conflict["error"]["kind"], "stale_revision");
    EXPECT_EQ(post("/ingest/No%20Such%20Page?mode=fixture", "").first, 404);
    EXPECT_EQ(post("/ingest/Wheel?mode=carrier-pigeon", "").first, 422);
    EXPECT_EQ(get("/no/such/route").first, 404);
}

TEST_F(HttpTest, RejectedMutationsLeaveStoreUntouched) {
    post("/ius", R"({"id":"wheel","name":"Wheel"})");
    post("/ius/wheel/revisions", read_card("wheel"));
    const auto before = testkit::slurp(config.store_path);
    const auto bad_card = R"({"scores":{"superseedness":5,"economic_impact":6}})";
    for (auto [path, body] : std::vector<std::pair<std::string, std::string>>{
             {"/ius", R"({"id":"Bad Id","name":"x"})"},
             {"/ius", R"({"id":"ok","name":""})"},
             {"/ius", R"({"id":"ok","name":"x","description_source":"rumour"})"},
             {"/ius/wheel/revisions", bad_card},
             {"/ius/zeppelin/revisions", read_card("wheel")},
             {"/ius/wheel/revisions", "[]"}}) {
        const auto [status, body_json] = post(path, body);
        EXPECT_GE(status, 400) << path << " " << body;
        EXPECT_LT(status, 500) << path << " " << body;
    }
    EXPECT_EQ(testkit::slurp(config.store_path), before);
}

TEST_F(HttpTest, IngestAndExport) {
    const auto [status, r] = post("/ingest/Wheel?mode=fixture", "");
    EXPECT_EQ(status, 200);
    EXPECT_EQ(r["fetch"]["extract"], "A wheel is a circular component.");
    EXPECT_EQ(r["iu"]["id"], "wheel");
    EXPECT_EQ(r["iu"]["description_source"], "wikipedia-fixture");
    post("/ius/wheel/revisions", read_card("wheel"));
    auto res = client->Get("/export/dataset");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, "wheel\tA wheel is a circular component.\t5\t5\t1\t1\t5\t1\t60\n");
    EXPECT_EQ(res->get_header_value("X-Dataset-Header"), dataset_header());
}

TEST_F(HttpTest, ServiceHoldsWriterLock) {
    // A second service on the same store and CLI writes are refused.
    try {
        HttpService second(config);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "store_lock_held");
    }
    const auto r = run_cli({"--store", config.store_path.string(), "add-iu", "--id", "x", "--name", "x"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("lock"), std::string::npos);
    // Reads still work.
    EXPECT_EQ(run_cli({"--store", config.store_path.string(), "rank"}).code, 0);
}

TEST_F(HttpTest, BindFailureOnBusyPort) {
    httplib::Server blocker;
    const int port = blocker.bind_to_any_port("127.0.0.1");
    TempDir other;
    AppConfig c = config;
    c.store_path = other / "s.jsonl";
    HttpService second(c);
    try {
        second.start("127.0.0.1", port);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "bind_failure");
    }
}

TEST_F(HttpTest, ConcurrentAppendsAreSerialized) {
    post("/ius", R"({"id":"wheel","name":"Wheel"})");
    const int port = client->port();
    {
        std::vector<std::jthread> pool;
        for (int t = 0; t < 8; ++t) {
            pool.emplace_back([&, port] {
                httplib::Client c("127.0.0.1", port);
                for (int i = 0; i < 5; ++i) {
                    auto res = c.Post("/ius/wheel/revisions", read_card("wheel"), "application/json");
                    ASSERT_TRUE(res);
                    ASSERT_EQ(res->status, 201);
                }
            });
        }
    }
    const auto hist = get("/ius/wheel/revisions").second;
    ASSERT_EQ(hist.size(), 40u);
    for (int i = 0; i < 40; ++i) EXPECT_EQ(hist[i]["revision_no"], i + 1);
    service->stop();
    auto reopened = Store::open(config.store_path, StoreMode::Reader);
    EXPECT_EQ(reopened.history("wheel").size(), 40u);
}

// ---------------------------------------------------------------------------
// Differential: the same inputs through both facades give the same results.

TEST(FacadeDifferential, CliAndHttpAgree) {
    TempDir dir;
    const std::string cli_store = (dir / "cli.jsonl").string();
    AppConfig http_config;
    http_config.store_path = dir / "http.jsonl";
    http_config.ingest.fixture_dir = fixtures();
    HttpService service(http_config);
    httplib::Client http("127.0.0.1", service.start("127.0.0.1", 0));

    auto cli = [&](std::vector<std::string> args) {
        args.insert(args.begin(), {"--machine", "--store", cli_store, "--fixture-dir", fixtures()});
        const auto r = run_cli(args);
        EXPECT_EQ(r.code, 0) << r.err;
        return json_lines(r.out);
    };
    auto http_get = [&](const std::string& path) { return Json::parse(http.Get(path)->body); };
    auto http_post = [&](const std::string& path, const std::string& body) {
        return Json::parse(http.Post(path, body, "application/json")->body);
    };
    auto as_array = [](std::vector<Json> lines) {
        Json a = Json::array();
        for (auto& l : lines) a.push_back(std::move(l));
        return a;
    };

    cli({"init"});
    struct Iu {
        std::string id, name, card;
        std::vector<std::string> tags;
    };
    const std::vector<Iu> ius = {{"wheel", "Wheel", "wheel", {}},
                                 {"www", "World Wide Web", "www", {"ai-related"}},
                                 {"communism", "Communism", "communism", {}}};
    for (const auto& iu : ius) {
        std::vector<std::string> args = {"add-iu", "--id", iu.id, "--name", iu.name};
        Json body{{"id", iu.id}, {"name", iu.name}, {"tags", iu.tags}};
        for (const auto& t : iu.tags) {
            args.push_back("--tag");
            args.push_back(t);
        }
        EXPECT_EQ(strip_times(cli(args).at(0)), strip_times(http_post("/ius", body.dump())));

        const auto card = testkit::slurp(golden(iu.card));
        Json payload = Json::parse(card);
        payload["note"] = "golden";
        EXPECT_EQ(strip_times(cli({"score", "--iu", iu.id, "--file", golden(iu.card), "--note", "golden"}).at(0)),
                  strip_times(http_post("/ius/" + iu.id + "/revisions", payload.dump())));
    }

    EXPECT_EQ(as_array(cli({"rank"})), http_get("/rank"));
    for (const auto& iu : ius) {
        EXPECT_EQ(strip_times(as_array(cli({"history", "--iu", iu.id}))),
                  strip_times(http_get("/ius/" + iu.id + "/revisions")));
        EXPECT_EQ(cli({"tai", "--iu", iu.id}).at(0), http_get("/ius/" + iu.id + "/tai"));
        for (Criterion c : kAllCriteria) {
            for (int level = 1; level <= 5; ++level) {
                const std::string k(key(c));
                EXPECT_EQ(cli({"whatif", "--iu", iu.id, "--criterion", k, "--level", std::to_string(level)}).at(0),
                          http_get("/ius/" + iu.id + "/whatif?criterion=" + k + "&level=" + std::to_string(level)));
            }
        }
    }
    EXPECT_EQ(as_array(cli({"criteria"})), http_get("/criteria"));
    EXPECT_EQ(strip_times(cli({"ingest", "--title", "Wheel", "--mode", "fixture"}).at(0)),
              strip_times(http_post("/ingest/Wheel?mode=fixture", "")));

    const auto cli_export = run_cli({"--store", cli_store, "export", "--out", "-"});
    EXPECT_EQ(cli_export.out, http.Get("/export/dataset")->body);
    service.stop();
}

}  // namespace
}  // namespace tom
