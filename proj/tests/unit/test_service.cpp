#include <atomic>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/model/parameters.hpp"
#include "tutorstack/service/event_log.hpp"
#include "tutorstack/service/http_server.hpp"
#include "tutorstack/service/tutor_service.hpp"
// After Eigen: <resolv.h> (pulled in by httplib) defines a _res macro.
#include "test_support.hpp"

using namespace tutorstack;
using namespace tutorstack::service;
using nlohmann::json;
using tutorstack::testing::StubServer;
using tutorstack::testing::TempDir;

namespace {

ServiceConfig config_for(const std::filesystem::path& dir) {
    ServiceConfig c;
    c.data_dir = dir;
    c.fetcher = [](const std::string& url) -> kb::FetchResult {
        throw kb::FetchError(kb::FetchErrorKind::network, "unreachable " + url);
    };
    c.clock = [] { return std::int64_t{1'000}; };
    return c;
}

json interaction(const std::string& q, const std::string& k, bool correct, std::int64_t ts) {
    return {{"question_id", q}, {"skill_id", k}, {"correct", correct}, {"timestamp", ts}};
}

int status_of(const std::function<void()>& f, std::string* code = nullptr) {
    try {
        f();
    } catch (const ApiError& e) {
        if (code) *code = e.code();
        return e.status();
    }
    return 200;
}

void save_tiny_model(const std::filesystem::path& dir) {
    model::Featurizer f;
    f.questions = model::Vocabulary({"q1", "q2"});
    f.skills = model::Vocabulary({"k1", "k2"});
    f.centroids = {{0.2, 0.2, 0.2, 0.0}, {0.8, 0.8, 0.8, 0.5}};
    model::ModelConfig c;
    c.embed_dim = 8;
    c.num_layers = 1;
    c.num_heads = 2;
    c.ffn_dim = 16;
    c.max_seq_len = 8;
    c.k_clusters = 2;
    c.question_vocab = f.questions.table_size();
    c.skill_vocab = f.skills.table_size();
    model::KtModel m(c, f);
    model::initialize(m.mutable_params(), c, 5);
    m.save(dir);
}

}  // namespace

TEST_CASE("interactions update mastery and reject bad input") {
    TempDir tmp("svc_interactions");
    TutorService svc(config_for(tmp.path));
    const auto r = svc.record_interaction("s1", interaction("q1", "k1", true, 10));
    CHECK(r["mastery"].get<double>() == kt::bkt_update(0.3, true, kt::BktParams{}));
    CHECK(r["interactions"] == 1);

    std::string code;
    CHECK(status_of([&] { svc.record_interaction("s1", interaction("q2", "k1", false, 10)); }, &code) == 422);
    CHECK(code == "out_of_order");
    CHECK(status_of([&] { svc.record_interaction("s1", interaction("q2", "k1", false, 5)); }) == 422);
    json missing = interaction("q2", "k1", false, 20);
    missing.erase("correct");
    CHECK(status_of([&] { svc.record_interaction("s1", missing); }, &code) == 400);
    CHECK(code == "bad_request");
    CHECK(status_of([&] { svc.record_interaction("s1", json::array()); }) == 400);
    CHECK(status_of([&] { svc.record_interaction("s1", interaction("", "k1", true, 30)); }) == 400);
    json numeric = interaction("q2", "k1", false, 40);
    numeric["correct"] = 1;
    CHECK(svc.record_interaction("s1", numeric)["interactions"] == 2);
    numeric["correct"] = 2;
    numeric["timestamp"] = 50;
    CHECK(status_of([&] { svc.record_interaction("s1", numeric); }) == 400);
    CHECK(svc.last_event_seq() == 2);
}

TEST_CASE("state, ingest, ask, recommendations and health") {
    TempDir tmp("svc_flow");
    {
        std::ofstream skills(tmp.path / kSkillsFile);
        skills << "skill_id,name,keywords\nk1,Matrix rank,rank;nullity\nk2,Vectors,basis;span\n";
    }
    TutorService svc(config_for(tmp.path));
    auto health = svc.health();
    CHECK(health["status"] == "ok");
    CHECK(health["model_loaded"] == false);
    CHECK(health["kb_docs"] == 0);

    std::string code;
    CHECK(status_of([&] { svc.state("nobody"); }, &code) == 404);
    CHECK(code == "unknown_student");
    CHECK(status_of([&] { svc.recommendations("nobody", 3); }) == 404);

    const auto doc = svc.ingest({{"title", "Rank"}, {"text", "The rank of a matrix equals its column rank."}});
    CHECK(doc["chunks"].get<int>() >= 1);
    CHECK(doc["created"] == true);
    svc.ingest({{"title", "Basis"}, {"text", "A basis is a linearly independent spanning set."}});
    CHECK(svc.ingest({{"title", "Basis"}, {"text", "A basis is a linearly independent spanning set."}})["created"] ==
          false);
    CHECK(svc.health()["kb_docs"] == 2);
    CHECK(status_of([&] { svc.ingest({{"url", "http://x/"}, {"text", "t"}, {"title", "t"}}); }) == 400);
    CHECK(status_of([&] { svc.ingest({{"url", "http://unreachable.test/"}}); }, &code) == 502);
    CHECK(code == "fetch_failed");
    CHECK(status_of([&] { svc.ingest({{"url", "ftp://x/"}}); }, &code) == 400);
    CHECK(status_of([&] { svc.ingest(json::object()); }) == 400);

    CHECK(status_of([&] { svc.ask("s9", {{"question", "   "}}); }) == 400);
    const auto fresh = svc.ask("s9", {{"question", "what is a basis?"}});
    CHECK(fresh["summary"]["new_student"] == false);
    CHECK(fresh["summary"]["interactions"] == 0);
    CHECK(fresh["citations"].size() >= 1);
    CHECK(svc.state("s9")["interactions"] == 0);

    for (int i = 0; i < 4; ++i) svc.record_interaction("s1", interaction("q1", "k1", false, 100 + i));
    for (int i = 0; i < 6; ++i) svc.record_interaction("s1", interaction("q2", "k2", true, 200 + i));
    const auto st = svc.state("s1");
    CHECK(st["interactions"] == 10);
    REQUIRE(st["weak_skills"].size() == 1);
    CHECK(st["weak_skills"][0]["skill_id"] == "k1");
    CHECK(st["weak_skills"][0]["name"] == "Matrix rank");

    // Offline replay of the same interactions through a fresh store.
    kt::FeatureStore offline;
    for (const auto& e : EventLog(tmp.path / kEventsFile).read_all()) {
        if (e.kind != "interaction") continue;
        const auto& p = e.payload;
        offline.record({p["student_id"], p["question_id"], p["skill_id"], p["correct"], p["timestamp"]});
    }
    for (const auto& s : st["skills"]) {
        CHECK(s["mastery"].get<double>() == offline.snapshot("s1")->skills.at(s["skill_id"]).mastery);
    }

    const auto recs = svc.recommendations("s1", 3);
    REQUIRE(recs["recommendations"].size() == 1);
    CHECK(recs["recommendations"][0]["skill_id"] == "k1");
    CHECK(recs["recommendations"][0]["title"] == "Rank");
    CHECK(svc.recommendations("s1", 0)["recommendations"].empty());

    for (int i = 0; i < 8; ++i) svc.record_interaction("s2", interaction("q2", "k2", true, 300 + i));
    const auto strong = svc.recommendations("s2", 3);
    CHECK(strong["recommendations"].empty());
    CHECK(strong["all_skills_strong"] == true);

    const auto with_candidate = svc.ask("s1", {{"question", "rank?"}, {"candidate_question_id", "q1"}});
    CHECK(with_candidate["summary"]["next_step"]["skill_id"] == "k1");
    CHECK(with_candidate["summary"]["next_step"]["source"] == "bkt");

    const auto events = EventLog(tmp.path / kEventsFile).read_all();
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
}

TEST_CASE("restart replays the event log to the same state") {
    TempDir tmp("svc_replay");
    std::map<std::string, std::string> before;
    {
        TutorService svc(config_for(tmp.path));
        svc.ingest({{"title", "Notes"}, {"text", "matrix rank notes"}});
        for (int i = 0; i < 25; ++i) {
            svc.record_interaction("a", interaction("q" + std::to_string(i % 3), "k" + std::to_string(i % 2),
                                                    i % 3 != 0, 1000 + i));
            if (i % 2 == 0) svc.record_interaction("b", interaction("q1", "k1", i % 4 == 0, 2000 + i));
        }
        svc.ask("c", {{"question", "matrix?"}});
        for (const char* s : {"a", "b", "c"}) before[s] = svc.state(s).dump();
    }
    // A crash mid-append leaves a torn line behind.
    {
        std::ofstream out(tmp.path / kEventsFile, std::ios::app);
        out << R"({"seq":999,"ts":1,"kind":"interac)";
    }
    TutorService again(config_for(tmp.path));
    for (const char* s : {"a", "b", "c"}) CHECK(again.state(s).dump() == before[s]);
    const auto seq = again.last_event_seq();
    again.record_interaction("a", interaction("q9", "k9", true, 5000));
    CHECK(again.last_event_seq() == seq + 1);
    CHECK(EventLog(tmp.path / kEventsFile).read_all().size() == seq + 1);
}

TEST_CASE("event log rejects gaps") {
    TempDir tmp("svc_gap");
    {
        std::ofstream out(tmp.path / "events.jsonl");
        out << R"({"seq":1,"ts":1,"kind":"ask","payload":{"student_id":"a"}})" << "\n"
            << R"({"seq":3,"ts":1,"kind":"ask","payload":{"student_id":"a"}})" << "\n";
    }
    CHECK_THROWS_AS(EventLog(tmp.path / "events.jsonl"), std::runtime_error);
}

TEST_CASE("reload picks up a checkpoint") {
    TempDir tmp("svc_reload");
    TutorService svc(config_for(tmp.path));
    svc.record_interaction("s1", interaction("q1", "k1", true, 1));
    CHECK(svc.health()["model_loaded"] == false);
    save_tiny_model(tmp.path);
    CHECK(svc.reload()["model_loaded"] == true);
    const auto a = svc.ask("s1", {{"question", "next?"}, {"candidate_question_id", "q2"}, {"candidate_skill_id", "k1"}});
    CHECK(a["summary"]["next_step"]["source"] == "model");
    const double p = a["summary"]["next_step"]["p_correct"];
    CHECK(p > 0.0);
    CHECK(p < 1.0);

    std::filesystem::resize_file(tmp.path / model::kWeightsFile, 8);
    std::string code;
    CHECK(status_of([&] { svc.reload(); }, &code) == 500);
    CHECK(code == "reload_failed");
    CHECK(svc.health()["model_loaded"] == true);
}

TEST_CASE("concurrent writers keep per-student order and a gapless log") {
    TempDir tmp("svc_concurrent");
    TutorService svc(config_for(tmp.path));
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    for (int t = 0; t < 6; ++t) {
        threads.emplace_back([&, t] {
            const auto student = "s" + std::to_string(t);
            for (int i = 0; i < 20; ++i) {
                try {
                    svc.record_interaction(student, interaction("q1", "k1", (i + t) % 2 == 0, i + 1));
                    if (i % 5 == 0) svc.ask(student, {{"question", "help"}});
                } catch (...) {
                    ++failures;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(failures == 0);
    for (int t = 0; t < 6; ++t) CHECK(svc.state("s" + std::to_string(t))["interactions"] == 20);
    const auto events = EventLog(tmp.path / kEventsFile).read_all();
    CHECK(events.size() == 6 * 24);
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
}

TEST_CASE("http layer") {
    TempDir tmp("svc_http");
    TutorService svc(config_for(tmp.path));
    HttpServer http(svc);
    const int port = http.bind("127.0.0.1", 0);
    std::thread serving([&] { http.listen(); });
    http.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Content-Type") == "application/json");
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(health->body)["status"] == "ok");

    auto r = cli.Post("/v1/students/s1/interactions", interaction("q1", "k1", true, 1).dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["mastery"].get<double>() == kt::bkt_update(0.3, true, kt::BktParams{}));

    auto dup = cli.Post("/v1/students/s1/interactions", interaction("q1", "k1", true, 1).dump(), "application/json");
    CHECK(dup->status == 422);
    CHECK(json::parse(dup->body)["code"] == "out_of_order");
    CHECK(json::parse(dup->body).contains("message"));

    auto bad = cli.Post("/v1/students/s1/ask", "{not json", "application/json");
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "malformed_json");

    auto ask = cli.Post("/v1/students/s2/ask", R"({"question":"what is rank?"})", "application/json");
    CHECK(ask->status == 200);
    CHECK(json::parse(ask->body)["answer"].get<std::string>().find("Mock tutor answer") != std::string::npos);

    CHECK(cli.Get("/v1/students/zzz/state")->status == 404);
    CHECK(json::parse(cli.Get("/v1/students/zzz/state")->body)["code"] == "unknown_student");
    CHECK(cli.Get("/v1/students/s1/state")->status == 200);
    CHECK(cli.Get("/v1/students/s1/recommendations?k=0")->status == 200);
    CHECK(cli.Get("/v1/students/s1/recommendations?k=abc")->status == 400);
    CHECK(cli.Post("/v1/admin/reload", "", "application/json")->status == 200);

    auto missing = cli.Get("/v1/nope");
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["code"] == "not_found");
    CHECK(missing->get_header_value("Content-Type") == "application/json");

    auto preflight = cli.Options("/v1/students/s1/ask");
    CHECK(preflight->status == 204);
    CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    http.stop();
    serving.join();
}

TEST_CASE("bearer token guards everything but health") {
    TempDir tmp("svc_auth");
    TutorService svc(config_for(tmp.path));
    HttpOptions opts;
    opts.token = "s3cret";
    HttpServer http(svc, opts);
    const int port = http.bind("127.0.0.1", 0);
    std::thread serving([&] { http.listen(); });
    http.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);
    CHECK(cli.Get("/v1/health")->status == 200);
    auto denied = cli.Get("/v1/students/s1/state");
    CHECK(denied->status == 401);
    CHECK(json::parse(denied->body)["code"] == "unauthorized");
    cli.set_bearer_token_auth("s3cret");
    CHECK(cli.Get("/v1/students/s1/state")->status == 404);
    CHECK(cli.Options("/v1/health")->status == 204);
    http.stop();
    serving.join();
}
