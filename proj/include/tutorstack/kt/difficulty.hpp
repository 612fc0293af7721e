#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tutorstack/kt/interaction.hpp"

namespace tutorstack::kt {

inline constexpr int kDefaultDifficulty = 5;
inline constexpr std::int64_t kDefaultMinAttempts = 5;

/// 1 (easy) .. 10 (extremely difficult) from the empirical success rate;
/// level 5 until `min_attempts` observations exist.
int difficulty_level(std::int64_t attempts, std::int64_t successes,
                     std::int64_t min_attempts = kDefaultMinAttempts);

struct ProblemDifficulty {
    std::string question_id;
    std::int64_t attempts = 0;
    std::int64_t successes = 0;

    int level(std::int64_t min_attempts = kDefaultMinAttempts) const {
        return difficulty_level(attempts, successes, min_attempts);
    }

    friend bool operator==(const ProblemDifficulty&, const ProblemDifficulty&) = default;
};

/// Attempt/success counts per question.
class DifficultyTable {
public:
    void observe(const Interaction& interaction);
    void observe_all(const std::vector<Interaction>& log);
    /// Overwrites the counts for one question (used when restoring state).
    void set_counts(const std::string& question_id, std::int64_t attempts, std::int64_t successes);

    /// Level for a question; unseen questions are at the cold-start default.
    int level(const std::string& question_id) const;
    const ProblemDifficulty* find(const std::string& question_id) const;

    const std::map<std::string, ProblemDifficulty>& entries() const { return entries_; }

    friend bool operator==(const DifficultyTable&, const DifficultyTable&) = default;

private:
    std::map<std::string, ProblemDifficulty> entries_;
};

}  // namespace tutorstack::kt
