#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "tutorstack/kb/text.hpp"
#include "tutorstack/model/parameters.hpp"
#include "tutorstack/rag/backend.hpp"
#include "tutorstack/rag/learner_state.hpp"
#include "tutorstack/rag/orchestrator.hpp"
#include "tutorstack/rag/prompt.hpp"
#include "tutorstack/util/random.hpp"
// After Eigen: <resolv.h> (pulled in by httplib) defines a _res macro.
#include "test_support.hpp"

using namespace tutorstack;
using namespace tutorstack::rag;
using tutorstack::testing::StubServer;
using tutorstack::testing::TempDir;

namespace {

kt::StudentSnapshot snapshot_with(const std::map<std::string, double>& masteries) {
    kt::StudentSnapshot s;
    s.student_id = "s1";
    std::int64_t t = 0;
    for (const auto& [skill, m] : masteries) {
        s.skills[skill] = {"s1", skill, m, 1};
        s.history.push_back({"s1", "q-" + skill, skill, true, ++t});
    }
    return s;
}

kb::Fetcher offline() {
    return [](const std::string& url) -> kb::FetchResult {
        throw kb::FetchError(kb::FetchErrorKind::network, "offline " + url);
    };
}

kb::Clock fixed_clock() {
    return [] { return std::int64_t{42}; };
}

class FailingBackend : public LlmBackend {
public:
    BackendInfo info() const override { return {"failing", 0}; }
    std::string complete(const PromptBundle&) override {
        throw LlmError(LlmErrorKind::network, "backend down");
    }
};

std::unique_ptr<model::KtModel> tiny_model() {
    model::Featurizer f;
    f.questions = model::Vocabulary({"q1", "q2"});
    f.skills = model::Vocabulary({"k1"});
    f.centroids = {{0.5, 0.5, 0.5, 0.0}};
    model::ModelConfig c;
    c.embed_dim = 8;
    c.num_layers = 1;
    c.num_heads = 2;
    c.ffn_dim = 16;
    c.max_seq_len = 8;
    c.k_clusters = 1;
    c.question_vocab = f.questions.table_size();
    c.skill_vocab = f.skills.table_size();
    auto m = std::make_unique<model::KtModel>(c, f);
    model::initialize(m->mutable_params(), c, 1);
    return m;
}

std::vector<kb::SearchHit> fake_hits(std::size_t n, std::size_t words_each) {
    std::vector<kb::SearchHit> hits;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (std::size_t w = 0; w < words_each; ++w) text += (w ? " w" : "w") + std::to_string(w);
        hits.push_back({"d" + std::to_string(i), i, 1.0 / static_cast<double>(i + 1), text, "T", "manual"});
    }
    return hits;
}

}  // namespace

TEST_CASE("summarize_state examples") {
    const SkillCatalog catalog(std::vector<SkillEntry>{{"A", "Algebra", {}}});
    const auto fresh = summarize_state("new", std::nullopt, {}, catalog, nullptr, std::nullopt);
    CHECK(fresh.new_student);
    CHECK(fresh.weak_skills.empty());
    CHECK(fresh.skills.empty());
    CHECK(fresh.interactions == 0);

    const auto s = summarize_state("s1", snapshot_with({{"A", 0.4}, {"B", 0.9}, {"C", 0.55}}), {},
                                   catalog, nullptr, std::nullopt);
    CHECK_FALSE(s.new_student);
    REQUIRE(s.weak_skills.size() == 2);
    CHECK(s.weak_skills[0].skill_id == "A");
    CHECK(s.weak_skills[0].name == "Algebra");
    CHECK(s.weak_skills[0].mastery == 0.4);
    CHECK(s.weak_skills[1].skill_id == "C");
    CHECK(s.strong_skills == 1);
    CHECK(s.render_text() == s.render_text());
    CHECK(s.render_text().find("Algebra [A] 0.40") != std::string::npos);

    const auto edge = summarize_state("s1", snapshot_with({{"A", 0.6}, {"B", 0.5999999}}), {}, catalog,
                                      nullptr, std::nullopt);
    REQUIRE(edge.weak_skills.size() == 1);
    CHECK(edge.weak_skills[0].skill_id == "B");
}

TEST_CASE("summarize_state with a candidate question") {
    const SkillCatalog catalog;
    const auto snap = snapshot_with({{"k1", 0.7}});
    const auto bkt = summarize_state("s1", snap, {}, catalog, nullptr, Candidate{"q2", "k1"});
    REQUIRE(bkt.next_step.has_value());
    CHECK(bkt.next_step->source == "bkt");
    CHECK(bkt.next_step->p_correct == doctest::Approx(kt::p_correct(0.7, {})));

    const auto model = tiny_model();
    const auto m = summarize_state("s1", snap, {}, catalog, model.get(), Candidate{"q2", "k1"});
    REQUIRE(m.next_step.has_value());
    CHECK(m.next_step->source == "model");
    CHECK(m.next_step->p_correct > 0.0);
    CHECK(m.next_step->p_correct < 1.0);
    CHECK(m.to_json()["next_step"]["p_correct"].get<double>() == m.next_step->p_correct);
    CHECK(m.render_text().find("q2") != std::string::npos);
}

TEST_CASE("assemble_prompt examples") {
    const auto summary = summarize_state("s1", snapshot_with({{"A", 0.3}}), {}, {}, nullptr, std::nullopt);
    const auto none = assemble_prompt(summary, {}, "What is rank?");
    CHECK(none.blocks.empty());
    CHECK(none.render().find("CONTEXT:") != std::string::npos);
    CHECK(none.render().find(summary.render_text()) != std::string::npos);

    const auto hits = fake_hits(3, 50);
    const auto full = assemble_prompt(summary, hits, "What is rank?", 10'000);
    REQUIRE(full.blocks.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(full.blocks[i].doc_id == hits[i].doc_id);
    CHECK(full.render().find("[chunk d0#0]") < full.render().find("[chunk d1#1]"));

    const auto tight = assemble_prompt(summary, hits, "What is rank?", 10);
    CHECK(tight.blocks.empty());
    CHECK(tight.render().find(summary.render_text()) != std::string::npos);

    CHECK(assemble_prompt(summary, hits, "What is rank?", 500).render() ==
          assemble_prompt(summary, hits, "What is rank?", 500).render());
    CHECK_THROWS_AS(assemble_prompt(summary, hits, "  \n"), std::invalid_argument);
}

TEST_CASE("assemble_prompt is monotone in budget and respects it") {
    Rng rng(8);
    const auto summary = summarize_state("s1", snapshot_with({{"A", 0.3}, {"B", 0.8}}), {}, {}, nullptr,
                                         std::nullopt);
    for (int round = 0; round < 200; ++round) {
        std::vector<kb::SearchHit> hits;
        const std::size_t n = rng.below(7);
        for (std::size_t i = 0; i < n; ++i) {
            auto h = fake_hits(1, 1 + rng.below(80)).front();
            h.doc_id = "d" + std::to_string(i);
            hits.push_back(h);
        }
        const std::size_t b1 = rng.below(400);
        const std::size_t b2 = b1 + rng.below(300);
        const auto p1 = assemble_prompt(summary, hits, "why?", b1);
        const auto p2 = assemble_prompt(summary, hits, "why?", b2);
        CHECK(p1.blocks.size() <= p2.blocks.size());
        for (std::size_t i = 0; i < p1.blocks.size(); ++i) CHECK(p1.blocks[i].doc_id == p2.blocks[i].doc_id);
        if (!p1.blocks.empty()) CHECK(word_count(p1.render()) <= b1);
    }
}

TEST_CASE("mock backend echoes structure") {
    MockBackend mock;
    const auto summary = summarize_state("s1", std::nullopt, {}, {}, nullptr, std::nullopt);
    const auto bundle = assemble_prompt(summary, fake_hits(2, 5), "Explain rank");
    const auto answer = mock.complete(bundle);
    CHECK(answer.find("[chunk d0#0]") != std::string::npos);
    CHECK(answer.find("[chunk d1#1]") != std::string::npos);
    CHECK(answer.find(kb::fnv1a_hex(bundle.summary)) != std::string::npos);
    CHECK(answer == mock.complete(bundle));
}

TEST_CASE("orchestrator ask with mock and failing backends") {
    TempDir tmp("rag_ask");
    kb::KnowledgeBase kb(tmp.path, offline(), fixed_clock());
    kt::FeatureStore store;
    const Orchestrator empty_tutor(kb, store, {}, std::make_shared<MockBackend>());
    const auto nothing = empty_tutor.ask("s1", "what is a matrix rank?");
    CHECK(nothing.citations.empty());
    CHECK(nothing.summary.new_student);
    CHECK_FALSE(nothing.degraded);

    kb.ingest_manual("Rank", "The rank of a matrix is the dimension of its column space.");
    kb.ingest_manual("Vectors", "A vector space is closed under addition and scaling.");
    store.record({"s1", "q1", "k1", false, 1});
    const Orchestrator tutor(kb, store, {}, std::make_shared<MockBackend>());
    const auto a1 = tutor.ask("s1", "what is a matrix rank?");
    const auto a2 = tutor.ask("s1", "what is a matrix rank?");
    CHECK(a1.to_json().dump() == a2.to_json().dump());
    REQUIRE_FALSE(a1.citations.empty());
    CHECK(a1.citations[0].title == "Rank");
    for (const auto& c : a1.citations) {
        CHECK(kb.snapshot()->find_chunk(c.doc_id, c.chunk_index) != nullptr);
        CHECK(a1.answer.find(c.tag()) != std::string::npos);
    }

    const Orchestrator broken(kb, store, {}, std::make_shared<FailingBackend>());
    const auto fallback = broken.ask("s1", "matrix rank");
    CHECK(fallback.degraded);
    CHECK(fallback.answer.rfind(kRetrievalOnlyNotice, 0) == 0);
    CHECK(fallback.answer.find("dimension of its column space") != std::string::npos);
    REQUIRE(fallback.citations.size() == 1);
    CHECK_THROWS_AS(broken.ask("s1", "zebra"), LlmUnavailableError);
    CHECK_THROWS_AS(tutor.ask("s1", ""), std::invalid_argument);
}

TEST_CASE("recommendation examples") {
    kb::KbSnapshot snap;
    snap.append({"d1", "manual", "Rank notes", 0, "", 1}, {{"d1", 0, "matrix rank nullity", 0, 3}});
    snap.append({"d2", "manual", "Vector notes", 0, "", 1}, {{"d2", 0, "vector basis span", 0, 3}});
    const SkillCatalog catalog(std::vector<SkillEntry>{{"R", "Rank", {"nullity"}}, {"V", "Vector", {"basis"}}});

    const auto one = summarize_state("s1", snapshot_with({{"R", 0.4}, {"V", 0.9}}), {}, catalog, nullptr,
                                     std::nullopt);
    const auto r1 = rank_recommendations(one, catalog, snap, 3);
    REQUIRE(r1.items.size() == 1);
    CHECK(r1.items[0].doc_id == "d1");
    CHECK(r1.items[0].rank == 1);
    CHECK(r1.items[0].rationale == "mastery 0.40 on skill Rank; revisit: Rank notes");

    // Equal bm25 for both pairs: the weaker skill comes first.
    const auto two = summarize_state("s1", snapshot_with({{"R", 0.5}, {"V", 0.2}}), {}, catalog, nullptr,
                                     std::nullopt);
    const auto r2 = rank_recommendations(two, catalog, snap, 3);
    REQUIRE(r2.items.size() == 2);
    CHECK(snap.index().score(kb::tokenize("rank nullity"), 0) ==
          doctest::Approx(snap.index().score(kb::tokenize("vector basis"), 1)));
    CHECK(r2.items[0].skill_id == "V");
    CHECK(r2.items[1].skill_id == "R");
    CHECK(rank_recommendations(two, catalog, snap, 0).items.empty());
    CHECK_FALSE(rank_recommendations(two, catalog, snap, 0).all_skills_strong);

    const auto strong = summarize_state("s1", snapshot_with({{"R", 0.9}}), {}, catalog, nullptr, std::nullopt);
    const auto r3 = rank_recommendations(strong, catalog, snap, 3);
    CHECK(r3.items.empty());
    CHECK(r3.all_skills_strong);
}

TEST_CASE("recommendation scores equal exhaustive recomputation") {
    Rng rng(31);
    const std::vector<std::string> vocab = {"rank", "matrix", "basis", "span", "kernel", "trace", "norm", "eigen"};
    for (int round = 0; round < 100; ++round) {
        kb::KbSnapshot snap;
        const std::size_t nchunks = 1 + rng.below(30);
        for (std::size_t c = 0; c < nchunks; ++c) {
            std::string text;
            for (std::size_t w = 0, n = 1 + rng.below(8); w < n; ++w) text += vocab[rng.below(vocab.size())] + " ";
            const auto id = "d" + std::to_string(c);
            snap.append({id, "manual", id, 0, text, 1}, {{id, 0, text, 0, 1}});
        }
        std::vector<SkillEntry> entries;
        std::map<std::string, double> masteries;
        for (std::size_t k = 0, n = 1 + rng.below(5); k < n; ++k) {
            const auto id = "k" + std::to_string(k);
            entries.push_back({id, vocab[rng.below(vocab.size())], {vocab[rng.below(vocab.size())]}});
            masteries[id] = std::round(rng.uniform() * 20.0) / 20.0;
        }
        const SkillCatalog catalog(entries);
        const auto summary = summarize_state("s", snapshot_with(masteries), {}, catalog, nullptr, std::nullopt);
        const std::size_t rec_k = rng.below(6);
        const auto recs = rank_recommendations(summary, catalog, snap, rec_k);

        // Exhaustive: best pair per chunk, then global order.
        std::vector<std::tuple<double, std::string, std::string>> expected;
        for (std::size_t c = 0; c < nchunks; ++c) {
            double best = 0.0;
            std::string best_skill;
            for (const auto& w : summary.weak_skills) {
                const auto q = kb::tokenize(catalog.find(w.skill_id)->query());
                const double s = (1.0 - w.mastery) * snap.index().score(q, static_cast<std::uint32_t>(c));
                if (s > best) {
                    best = s;
                    best_skill = w.skill_id;
                }
            }
            if (best > 0.0) expected.emplace_back(best, "d" + std::to_string(c), best_skill);
        }
        std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            return std::get<1>(a) < std::get<1>(b);
        });
        CHECK(recs.all_skills_strong == summary.weak_skills.empty());
        REQUIRE(recs.items.size() == std::min(rec_k, expected.size()));
        for (std::size_t i = 0; i < recs.items.size(); ++i) {
            CHECK(recs.items[i].score == doctest::Approx(std::get<0>(expected[i])).epsilon(1e-12));
            CHECK(recs.items[i].doc_id == std::get<1>(expected[i]));
            CHECK(recs.items[i].skill_id == std::get<2>(expected[i]));
            if (i > 0) CHECK(recs.items[i - 1].score >= recs.items[i].score);
        }
    }
}

TEST_CASE("recommendations do not depend on the backend") {
    TempDir tmp("rag_recs");
    kb::KnowledgeBase kb(tmp.path, offline(), fixed_clock());
    kb.ingest_manual("Rank", "matrix rank and nullity");
    kb.ingest_manual("Basis", "basis vectors span a space");
    kt::FeatureStore store;
    store.record({"s1", "q1", "R", false, 1});
    store.record({"s1", "q2", "V", false, 2});
    const SkillCatalog catalog(std::vector<SkillEntry>{{"R", "Rank", {"nullity"}}, {"V", "Vectors", {"basis", "span"}}});
    const Orchestrator mock(kb, store, catalog, std::make_shared<MockBackend>());
    const Orchestrator failing(kb, store, catalog, std::make_shared<FailingBackend>());
    CHECK(mock.recommend("s1").to_json() == failing.recommend("s1").to_json());
    CHECK(mock.recommend("s1").items.size() == 2);
    CHECK(mock.recommend("unknown").all_skills_strong);
}

TEST_CASE("skill catalog loading") {
    TempDir tmp("rag_catalog");
    const auto path = tmp.path / "skills.csv";
    {
        std::ofstream out(path);
        out << "skill_id,name,keywords\nk1,Matrix rank,rank; nullity ;column space\nk2,Vectors,\n";
    }
    const auto c = SkillCatalog::load(path);
    REQUIRE(c.find("k1") != nullptr);
    CHECK(c.find("k1")->keywords == std::vector<std::string>{"rank", "nullity", "column space"});
    CHECK(c.find("k2")->keywords.empty());
    CHECK(c.display_name("k9") == "k9");
    {
        std::ofstream out(path);
        out << "id,name\nk1,x\n";
    }
    CHECK_THROWS_AS(SkillCatalog::load(path), std::invalid_argument);
    CHECK_THROWS_AS(SkillCatalog(std::vector<SkillEntry>{{"a", "", {}}, {"a", "", {}}}), std::invalid_argument);
}

TEST_CASE("remote backend against a stub endpoint") {
    StubServer stub;
    std::atomic<int> hits{0};
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    nlohmann::json last_request;
    std::mutex last_mutex;
    auto& s = stub.server();
    s.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(last_mutex);
            last_request = nlohmann::json::parse(req.body);
            last_request["auth"] = req.get_header_value("Authorization");
        }
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"fixed text"}}]})",
                        "application/json");
    });
    s.Post("/unauthorized", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    s.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        std::this_thread::sleep_for(std::chrono::milliseconds(700));
        res.set_content("{}", "application/json");
    });
    s.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits == 1) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"second try"}}]})", "application/json");
    });
    s.Post("/garbage", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"nope":1})", "application/json");
    });
    s.Post("/busy", [&](const httplib::Request&, httplib::Response& res) {
        const int now = ++active;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
        --active;
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    s.new_task_queue = [] { return new httplib::ThreadPool(12); };

    const auto summary = summarize_state("s1", std::nullopt, {}, {}, nullptr, std::nullopt);
    const auto bundle = assemble_prompt(summary, fake_hits(1, 3), "Explain rank");
    auto make = [&](const std::string& path, int timeout_ms = 5000) {
        RemoteConfig c;
        c.url = stub.url(path);
        c.key = "secret";
        c.model = "test-model";
        c.timeout = std::chrono::milliseconds(timeout_ms);
        return RemoteBackend(c);
    };
    auto kind_of = [&](RemoteBackend backend) {
        try {
            backend.complete(bundle);
        } catch (const LlmError& e) {
            return std::string(to_string(e.kind()));
        }
        return std::string("none");
    };

    CHECK(make("/ok").complete(bundle) == "fixed text");
    CHECK(last_request["model"] == "test-model");
    CHECK(last_request["auth"] == "Bearer secret");
    REQUIRE(last_request["messages"].size() == 2);
    CHECK(last_request["messages"][0]["role"] == "system");
    CHECK(last_request["messages"][1]["content"].get<std::string>() == bundle.render_user());

    hits = 0;
    CHECK(kind_of(make("/unauthorized")) == "auth");
    CHECK(hits == 1);
    hits = 0;
    CHECK(kind_of(make("/slow", 300)) == "timeout");
    CHECK(hits == 2);
    hits = 0;
    CHECK(make("/flaky").complete(bundle) == "second try");
    CHECK(hits == 2);
    CHECK(kind_of(make("/garbage")) == "malformed");

    std::vector<std::thread> threads;
    for (int i = 0; i < 10; ++i) {
        threads.emplace_back([&] { make("/busy").complete(bundle); });
    }
    for (auto& t : threads) t.join();
    CHECK(peak.load() >= 2);
    CHECK(peak.load() <= 4);
}

TEST_CASE("remote config from the environment") {
    ::unsetenv("TUTORSTACK_LLM_URL");
    ::unsetenv("TUTORSTACK_LLM_KEY");
    CHECK_THROWS_AS(RemoteConfig::from_env(), LlmError);
    ::setenv("TUTORSTACK_LLM_URL", "http://127.0.0.1:9/v1/chat/completions", 1);
    CHECK_THROWS_AS(RemoteConfig::from_env(), LlmError);
    ::setenv("TUTORSTACK_LLM_KEY", "k", 1);
    ::setenv("TUTORSTACK_LLM_MODEL", "m", 1);
    const auto c = RemoteConfig::from_env();
    CHECK(c.model == "m");
    CHECK(c.timeout == std::chrono::milliseconds(30'000));
    ::unsetenv("TUTORSTACK_LLM_URL");
    ::unsetenv("TUTORSTACK_LLM_KEY");
    ::unsetenv("TUTORSTACK_LLM_MODEL");
    CHECK_THROWS_AS(RemoteBackend(RemoteConfig{"ftp://x", "k"}), LlmError);
}
