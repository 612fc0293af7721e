#include "tutorstack/sim/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "tutorstack/util/csv.hpp"
#include "tutorstack/util/random.hpp"

namespace tutorstack::sim {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string padded(char prefix, std::size_t index, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, index);
    return buf;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace

void SimConfig::validate() const {
    if (num_students == 0 || num_skills == 0 || num_questions == 0 || steps == 0) {
        throw std::invalid_argument("simulation counts must be >= 1");
    }
    if (num_questions < num_skills) {
        throw std::invalid_argument("need at least one question per skill");
    }
    auto check = [](Range r, double max_excl, bool inclusive_one, const char* name) {
        const bool ok = r.lo >= 0.0 && r.lo <= r.hi &&
                        (inclusive_one ? r.hi <= max_excl : r.hi < max_excl);
        if (!ok) throw std::invalid_argument(std::string("invalid range for ") + name);
    };
    check(p_init, 1.0, true, "p_init");
    check(p_transit, 1.0, true, "p_transit");
    check(p_guess, 0.5, false, "p_guess");
    check(p_slip, 0.5, false, "p_slip");
}

std::string student_name(std::size_t index) { return padded('s', index, 4); }
std::string skill_name(std::size_t index) { return padded('k', index, 3); }
std::string question_name(std::size_t index) { return padded('q', index, 4); }

Simulation simulate(const SimConfig& config) {
    config.validate();
    Simulation sim;
    sim.interactions.reserve(config.num_students * config.steps);
    sim.truth.reserve(config.num_students * config.steps);
    sim.params.resize(config.num_students);

    std::vector<std::vector<std::size_t>> questions_of(config.num_skills);
    for (std::size_t q = 0; q < config.num_questions; ++q) {
        questions_of[q % config.num_skills].push_back(q);
    }

    for (std::size_t s = 0; s < config.num_students; ++s) {
        // One generator per student keeps output independent of iteration order.
        Rng rng(splitmix(config.seed ^ splitmix(s + 1)));
        auto& params = sim.params[s];
        params.resize(config.num_skills);
        std::vector<kt::BktBelief> mastery(config.num_skills);
        for (std::size_t k = 0; k < config.num_skills; ++k) {
            auto& p = params[k];
            p.p_init = rng.uniform(config.p_init.lo, config.p_init.hi);
            p.p_transit = rng.uniform(config.p_transit.lo, config.p_transit.hi);
            p.p_guess = rng.uniform(config.p_guess.lo, config.p_guess.hi);
            p.p_slip = rng.uniform(config.p_slip.lo, config.p_slip.hi);
            mastery[k] = kt::BktBelief::from_mastery(p.p_init);
        }
        const auto student = student_name(s);
        for (std::size_t step = 0; step < config.steps; ++step) {
            const std::size_t k = rng.below(config.num_skills);
            const auto& pool = questions_of[k];
            const std::size_t q = pool[rng.below(pool.size())];
            const double p = kt::p_correct(mastery[k].mastery(), params[k]);
            const bool correct = rng.bernoulli(p);
            sim.interactions.push_back({student, question_name(q), skill_name(k), correct,
                                        static_cast<std::int64_t>(step) * 60'000});
            sim.truth.push_back({student, step, p, mastery[k].mastery()});
            mastery[k] = kt::bkt_step(mastery[k], correct, params[k]);
        }
    }
    return sim;
}

void write_simulation(const Simulation& sim, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    kt::write_interactions_csv((dir / "interactions.csv").string(), sim.interactions);
    std::ofstream out(dir / "ground_truth.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write ground_truth.csv");
    out << "student_id,step,p_correct\n";
    for (const auto& t : sim.truth) {
        out << csv::escape_field(t.student_id) << ',' << t.step << ',' << format_double(t.p_correct)
            << '\n';
    }
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
    const auto rows = csv::read_file(path.string());
    if (rows.empty() || rows.front() != std::vector<std::string>{"student_id", "step", "p_correct"}) {
        throw std::invalid_argument(path.string() + ": header must be student_id,step,p_correct");
    }
    std::vector<GroundTruth> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 3) throw std::invalid_argument("ground truth row " + std::to_string(r));
        GroundTruth g;
        g.student_id = f[0];
        g.step = static_cast<std::size_t>(std::stoull(f[1]));
        g.p_correct = std::stod(f[2]);
        out.push_back(std::move(g));
    }
    return out;
}

std::pair<std::vector<kt::Interaction>, std::vector<kt::Interaction>> split_by_student(
    const std::vector<kt::Interaction>& log, double test_fraction, std::uint64_t seed) {
    std::set<std::string> ids;
    for (const auto& it : log) ids.insert(it.student_id);
    std::vector<std::string> order(ids.begin(), ids.end());
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(order.size())));
    const std::set<std::string> test(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::pair<std::vector<kt::Interaction>, std::vector<kt::Interaction>> out;
    for (const auto& it : log) (test.contains(it.student_id) ? out.second : out.first).push_back(it);
    return out;
}

}  // namespace tutorstack::sim
