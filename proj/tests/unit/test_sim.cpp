#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/sim/evaluation.hpp"
#include "tutorstack/sim/metrics.hpp"
#include "tutorstack/sim/simulator.hpp"
#include "tutorstack/util/random.hpp"

using namespace tutorstack;

namespace {

double brute_force_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    double concordant = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    return concordant / pairs;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

sim::SimConfig small_config() {
    sim::SimConfig c;
    c.num_students = 12;
    c.num_skills = 4;
    c.num_questions = 12;
    c.steps = 40;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("auc examples") {
    CHECK(sim::auc({0.9, 0.8, 0.3, 0.2}, {true, true, false, false}) == 1.0);
    CHECK(sim::auc({0.9, 0.4, 0.6, 0.2}, {true, false, false, true}) == 0.5);
    CHECK(sim::auc({0.3, 0.3, 0.3, 0.3}, {true, false, true, false}) == 0.5);
    CHECK_THROWS_AS(sim::auc({0.1, 0.2}, {true, true}), sim::UndefinedAucError);
    CHECK_THROWS_AS(sim::auc({}, {}), sim::UndefinedAucError);
    CHECK_THROWS_AS(sim::auc({0.1}, {true, false}), std::invalid_argument);
}

TEST_CASE("auc agrees with brute-force pair counting") {
    Rng rng(11);
    int checked = 0;
    while (checked < 1000) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<double> scores(n);
        std::vector<bool> labels(n);
        bool pos = false;
        bool neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid so ties are common.
            scores[i] = static_cast<double>(rng.below(8)) / 8.0;
            labels[i] = rng.bernoulli(0.5);
            (labels[i] ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        ++checked;
        const double a = sim::auc(scores, labels);
        CHECK(a == doctest::Approx(brute_force_auc(scores, labels)).epsilon(1e-12));
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("log loss and accuracy") {
    CHECK(sim::accuracy({0.9, 0.2, 0.6}, {true, false, false}) == doctest::Approx(2.0 / 3.0));
    CHECK(sim::log_loss({0.5, 0.5}, {true, false}) == doctest::Approx(std::log(2.0)));
    CHECK(std::isfinite(sim::log_loss({0.0, 1.0}, {true, false})));
}

TEST_CASE("sim with no slip, no guess and full initial mastery answers everything correctly") {
    auto c = small_config();
    c.p_init = {1.0, 1.0};
    c.p_guess = {0.0, 0.0};
    c.p_slip = {0.0, 0.0};
    const auto s = sim::simulate(c);
    REQUIRE(s.interactions.size() == c.num_students * c.steps);
    for (const auto& it : s.interactions) CHECK(it.correct);
}

TEST_CASE("sim is reproducible byte for byte") {
    const auto base = std::filesystem::temp_directory_path() / "tutorstack_sim_test";
    std::filesystem::remove_all(base);
    sim::write_simulation(sim::simulate(small_config()), base / "a");
    sim::write_simulation(sim::simulate(small_config()), base / "b");
    CHECK(slurp(base / "a" / "interactions.csv") == slurp(base / "b" / "interactions.csv"));
    CHECK(slurp(base / "a" / "ground_truth.csv") == slurp(base / "b" / "ground_truth.csv"));

    auto other = small_config();
    other.seed = 4;
    sim::write_simulation(sim::simulate(other), base / "c");
    CHECK(slurp(base / "a" / "interactions.csv") != slurp(base / "c" / "interactions.csv"));

    const auto truth = sim::read_ground_truth(base / "a" / "ground_truth.csv");
    const auto direct = sim::simulate(small_config()).truth;
    REQUIRE(truth.size() == direct.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        CHECK(truth[i].student_id == direct[i].student_id);
        CHECK(truth[i].step == direct[i].step);
        CHECK(truth[i].p_correct == direct[i].p_correct);
    }
    std::filesystem::remove_all(base);
}

TEST_CASE("bernoulli draws match their probability") {
    Rng rng(5);
    for (const double p : {0.1, 0.37, 0.5, 0.83}) {
        int hits = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) hits += rng.bernoulli(p) ? 1 : 0;
        CHECK(std::abs(static_cast<double>(hits) / n - p) < 0.01);
    }
}

TEST_CASE("recomputing mastery trajectories reproduces the recorded truth") {
    auto c = small_config();
    c.num_students = 30;
    const auto s = sim::simulate(c);
    std::map<std::pair<std::size_t, std::string>, kt::BktBelief> mastery;
    for (std::size_t i = 0; i < s.interactions.size(); ++i) {
        const auto& it = s.interactions[i];
        const std::size_t student = std::stoul(it.student_id.substr(1));
        const std::size_t skill = std::stoul(it.skill_id.substr(1));
        const std::size_t question = std::stoul(it.question_id.substr(1));
        CHECK(question % c.num_skills == skill);
        const auto& params = s.params[student][skill];
        auto [pos, fresh] = mastery.try_emplace({student, it.skill_id}, kt::BktBelief::from_mastery(params.p_init));
        CHECK(s.truth[i].mastery == pos->second.mastery());
        CHECK(s.truth[i].p_correct == kt::p_correct(pos->second.mastery(), params));
        pos->second = kt::bkt_step(pos->second, it.correct, params);
    }
}

TEST_CASE("sim config validation") {
    auto c = small_config();
    c.num_students = 0;
    CHECK_THROWS_AS(sim::simulate(c), std::invalid_argument);
    c = small_config();
    c.p_guess = {0.1, 0.6};
    CHECK_THROWS_AS(sim::simulate(c), std::invalid_argument);
    c = small_config();
    c.p_init = {0.5, 0.4};
    CHECK_THROWS_AS(sim::simulate(c), std::invalid_argument);
}

TEST_CASE("split by student keeps students whole") {
    const auto s = sim::simulate(small_config());
    const auto [train, test] = sim::split_by_student(s.interactions, 0.25, 9);
    CHECK(train.size() + test.size() == s.interactions.size());
    std::set<std::string> a;
    std::set<std::string> b;
    for (const auto& it : train) a.insert(it.student_id);
    for (const auto& it : test) b.insert(it.student_id);
    CHECK(b.size() == 3);
    for (const auto& id : b) CHECK_FALSE(a.contains(id));
}

TEST_CASE("evaluating the ground truth itself gives ceiling == model") {
    const auto s = sim::simulate(small_config());
    const auto [train, test] = sim::split_by_student(s.interactions, 0.5, 1);
    kt::DifficultyTable counts;
    counts.observe_all(train);
    const auto report =
        sim::evaluate(sim::ground_truth_predictor(s.truth), test, counts, &s.truth);
    REQUIRE(report.ceiling_auc.has_value());
    CHECK(*report.ceiling_auc == report.model_auc);
    CHECK(report.predictions == test.size());
    CHECK(report.test_students == 6);
}

TEST_CASE("constant predictor scores 0.5") {
    auto c = small_config();
    c.num_students = 40;
    const auto s = sim::simulate(c);
    kt::DifficultyTable counts;
    const auto report = sim::evaluate(
        [](const std::vector<kt::Interaction>&, const kt::Interaction&) { return 0.5; },
        s.interactions, counts);
    CHECK(report.model_auc == 0.5);
    CHECK_FALSE(report.ceiling_auc.has_value());
}

TEST_CASE("baseline matches a brute-force per-question mean") {
    auto c = small_config();
    c.num_students = 40;
    const auto s = sim::simulate(c);
    const auto [train, test] = sim::split_by_student(s.interactions, 0.3, 2);
    kt::DifficultyTable counts;
    counts.observe_all(train);
    const auto report = sim::evaluate(
        [](const std::vector<kt::Interaction>&, const kt::Interaction&) { return 0.5; }, test,
        counts);

    std::map<std::string, std::pair<double, double>> tally;
    double total = 0.0;
    double right = 0.0;
    for (const auto& it : train) {
        tally[it.question_id].first += 1.0;
        tally[it.question_id].second += it.correct ? 1.0 : 0.0;
        total += 1.0;
        right += it.correct ? 1.0 : 0.0;
    }
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& [id, history] : kt::group_by_student(test)) {
        for (const auto& it : history) {
            const auto f = tally.find(it.question_id);
            scores.push_back(f == tally.end() ? right / total : f->second.second / f->second.first);
            labels.push_back(it.correct);
        }
    }
    CHECK(report.baseline_auc == doctest::Approx(brute_force_auc(scores, labels)).epsilon(1e-12));
}

TEST_CASE("eval report json") {
    sim::EvalReport r;
    r.model_auc = 0.75;
    const auto json = r.to_json();
    CHECK(json.find("\"model_auc\"") != std::string::npos);
    CHECK(nlohmann::json::parse(json)["ceiling_auc"].is_null());
}
