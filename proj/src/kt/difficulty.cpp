#include "tutorstack/kt/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tutorstack::kt {

int difficulty_level(std::int64_t attempts, std::int64_t successes, std::int64_t min_attempts) {
    if (attempts < 0 || successes < 0 || min_attempts < 0) {
        throw std::invalid_argument("difficulty_level: counts must be non-negative");
    }
    if (successes > attempts) {
        throw std::invalid_argument("difficulty_level: successes exceed attempts");
    }
    if (attempts < min_attempts || attempts == 0) return kDefaultDifficulty;
    // Integer arithmetic keeps exact boundaries: floor(9 * failures / attempts).
    const std::int64_t failures = attempts - successes;
    const auto level = 1 + (9 * failures) / attempts;
    return static_cast<int>(std::clamp<std::int64_t>(level, 1, 10));
}

void DifficultyTable::observe(const Interaction& interaction) {
    auto& entry = entries_[interaction.question_id];
    entry.question_id = interaction.question_id;
    ++entry.attempts;
    if (interaction.correct) ++entry.successes;
}

void DifficultyTable::observe_all(const std::vector<Interaction>& log) {
    for (const auto& it : log) observe(it);
}

void DifficultyTable::set_counts(const std::string& question_id, std::int64_t attempts,
                                 std::int64_t successes) {
    difficulty_level(attempts, successes);  // validates the counts
    entries_[question_id] = {question_id, attempts, successes};
}

int DifficultyTable::level(const std::string& question_id) const {
    const auto* entry = find(question_id);
    return entry ? entry->level() : kDefaultDifficulty;
}

const ProblemDifficulty* DifficultyTable::find(const std::string& question_id) const {
    const auto it = entries_.find(question_id);
    return it == entries_.end() ? nullptr : &it->second;
}

}  // namespace tutorstack::kt
