#include "tutorstack/kt/interaction.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include "tutorstack/util/csv.hpp"

namespace tutorstack::kt {

void validate(const Interaction& interaction) {
    if (interaction.student_id.empty() || interaction.question_id.empty() ||
        interaction.skill_id.empty()) {
        throw std::invalid_argument("interaction ids must be non-empty");
    }
    if (interaction.timestamp < 0) {
        throw std::invalid_argument("interaction timestamp must be >= 0");
    }
}

namespace {

std::int64_t parse_int(const std::string& text, std::size_t row) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("row " + std::to_string(row) + ": bad integer '" + text + "'");
    }
    return value;
}

}  // namespace

std::vector<Interaction> read_interactions_csv(const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty()) throw std::invalid_argument(path + ": missing header");
    const std::vector<std::string> expected{"student_id", "question_id", "skill_id", "correct",
                                            "timestamp"};
    if (rows.front() != expected) {
        throw std::invalid_argument(path + ": header must be " +
                                    "student_id,question_id,skill_id,correct,timestamp");
    }
    std::vector<Interaction> log;
    log.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 5) {
            throw std::invalid_argument("row " + std::to_string(r) + ": expected 5 fields");
        }
        if (f[3] != "0" && f[3] != "1") {
            throw std::invalid_argument("row " + std::to_string(r) + ": correct must be 0 or 1");
        }
        Interaction it{f[0], f[1], f[2], f[3] == "1", parse_int(f[4], r)};
        validate(it);
        log.push_back(std::move(it));
    }
    return log;
}

void write_interactions_csv(const std::string& path, const std::vector<Interaction>& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "student_id,question_id,skill_id,correct,timestamp\n";
    for (const auto& it : log) {
        out << csv::escape_field(it.student_id) << ',' << csv::escape_field(it.question_id) << ','
            << csv::escape_field(it.skill_id) << ',' << (it.correct ? '1' : '0') << ','
            << it.timestamp << '\n';
    }
}

std::map<std::string, std::vector<Interaction>> group_by_student(std::vector<Interaction> log) {
    std::map<std::string, std::vector<Interaction>> by_student;
    for (auto& it : log) by_student[it.student_id].push_back(std::move(it));
    for (auto& [id, history] : by_student) {
        std::stable_sort(history.begin(), history.end(),
                         [](const Interaction& a, const Interaction& b) {
                             return a.timestamp < b.timestamp;
                         });
    }
    return by_student;
}

std::vector<Interaction> filter_skill(const std::vector<Interaction>& history,
                                      const std::string& skill_id) {
    std::vector<Interaction> out;
    std::copy_if(history.begin(), history.end(), std::back_inserter(out),
                 [&](const Interaction& it) { return it.skill_id == skill_id; });
    return out;
}

}  // namespace tutorstack::kt
