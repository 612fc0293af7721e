#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tutorstack::kt {

/// One student-question event.
struct Interaction {
    std::string student_id;
    std::string question_id;
    std::string skill_id;
    bool correct = false;
    std::int64_t timestamp = 0;  // ms since epoch

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Throws std::invalid_argument when ids are empty or the timestamp is negative.
void validate(const Interaction& interaction);

/// Parses `student_id,question_id,skill_id,correct,timestamp` CSV (header
/// required, rows in any order).
std::vector<Interaction> read_interactions_csv(const std::string& path);

void write_interactions_csv(const std::string& path, const std::vector<Interaction>& log);

/// Groups by student and stable-sorts each history by timestamp. Keys are
/// ordered so iteration is deterministic.
std::map<std::string, std::vector<Interaction>> group_by_student(std::vector<Interaction> log);

/// The subsequence of one history that touches `skill_id`, order preserved.
std::vector<Interaction> filter_skill(const std::vector<Interaction>& history,
                                      const std::string& skill_id);

}  // namespace tutorstack::kt
