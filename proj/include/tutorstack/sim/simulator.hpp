#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/kt/interaction.hpp"

namespace tutorstack::sim {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct SimConfig {
    std::size_t num_students = 200;
    std::size_t num_skills = 20;
    std::size_t num_questions = 100;
    std::size_t steps = 200;
    Range p_init{0.05, 0.6};
    Range p_transit{0.05, 0.35};
    Range p_guess{0.05, 0.3};
    Range p_slip{0.02, 0.2};
    std::uint64_t seed = 42;

    /// Throws std::invalid_argument on zero counts or ranges outside BKT bounds.
    void validate() const;
};

struct GroundTruth {
    std::string student_id;
    std::size_t step = 0;
    double p_correct = 0.0;
    double mastery = 0.0;  // latent mastery before the step
};

struct Simulation {
    std::vector<kt::Interaction> interactions;  // ordered by student, then step
    std::vector<GroundTruth> truth;             // parallel to interactions
    /// Hidden parameters per (student index, skill index).
    std::vector<std::vector<kt::BktParams>> params;
};

/// Deterministic BKT-world students. Question q belongs to skill q mod
/// num_skills; every step samples a skill, then one of its questions, draws
/// correctness from the current mastery and advances mastery with bkt_update.
Simulation simulate(const SimConfig& config);

std::string student_name(std::size_t index);
std::string skill_name(std::size_t index);
std::string question_name(std::size_t index);

/// Writes interactions.csv and ground_truth.csv into `dir`.
void write_simulation(const Simulation& sim, const std::filesystem::path& dir);

/// Reads ground_truth.csv (`student_id,step,p_correct`).
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);

/// Splits a log by student: a seeded `test_fraction` of students goes to the
/// second element.
std::pair<std::vector<kt::Interaction>, std::vector<kt::Interaction>> split_by_student(
    const std::vector<kt::Interaction>& log, double test_fraction, std::uint64_t seed);

}  // namespace tutorstack::sim
