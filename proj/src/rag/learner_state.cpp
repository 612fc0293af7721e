#include "tutorstack/rag/learner_state.hpp"

#include <algorithm>
#include <cstdio>

namespace tutorstack::rag {

namespace {

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

nlohmann::json skill_json(const SkillState& s) {
    return {{"skill_id", s.skill_id}, {"name", s.name}, {"mastery", s.mastery},
            {"observations", s.observations}};
}

}  // namespace

std::string LearnerStateSummary::render_text() const {
    std::string out = "Student " + student_id + ": ";
    if (new_student || interactions == 0) {
        out += "new student with no recorded interactions.";
    } else {
        out += std::to_string(interactions) + " interactions, ability cluster " +
               std::to_string(cluster_id) + ".";
        out += "\nWeak skills (mastery below " + fixed(weak_threshold, 2) + "): ";
        if (weak_skills.empty()) out += "none";
        for (std::size_t i = 0; i < weak_skills.size(); ++i) {
            const auto& s = weak_skills[i];
            if (i) out += "; ";
            out += s.name == s.skill_id ? s.skill_id : s.name + " [" + s.skill_id + "]";
            out += " " + fixed(s.mastery, 2);
        }
        out += ".\nStrong skills: " + std::to_string(strong_skills) + ".";
    }
    if (next_step) {
        out += "\nPredicted probability of answering question " + next_step->question_id +
               " correctly: " + fixed(next_step->p_correct, 3) + ".";
    }
    return out;
}

nlohmann::json LearnerStateSummary::to_json() const {
    nlohmann::json weak = nlohmann::json::array();
    for (const auto& s : weak_skills) weak.push_back(skill_json(s));
    nlohmann::json all = nlohmann::json::array();
    for (const auto& s : skills) all.push_back(skill_json(s));
    nlohmann::json j = {{"student_id", student_id},
                        {"new_student", new_student},
                        {"interactions", interactions},
                        {"cluster_id", cluster_id},
                        {"ability", ability},
                        {"weak_threshold", weak_threshold},
                        {"weak_skills", weak},
                        {"strong_skills", strong_skills},
                        {"skills", all}};
    if (next_step) {
        j["next_step"] = {{"question_id", next_step->question_id},
                          {"skill_id", next_step->skill_id},
                          {"p_correct", next_step->p_correct},
                          {"source", next_step->source}};
    } else {
        j["next_step"] = nullptr;
    }
    return j;
}

LearnerStateSummary summarize_state(const std::string& student_id,
                                    const std::optional<kt::StudentSnapshot>& snapshot,
                                    const kt::BktParams& bkt, const SkillCatalog& catalog,
                                    const model::KtModel* model,
                                    const std::optional<Candidate>& candidate,
                                    double weak_threshold) {
    LearnerStateSummary s;
    s.student_id = student_id;
    s.weak_threshold = weak_threshold;
    s.new_student = !snapshot.has_value();
    if (snapshot) {
        s.interactions = snapshot->interactions();
        s.cluster_id = snapshot->profile.cluster_id;
        s.ability = snapshot->profile.features;
        for (const auto& [id, m] : snapshot->skills) {
            SkillState st{id, catalog.display_name(id), m.mastery, m.observations};
            s.skills.push_back(st);
            if (m.mastery < weak_threshold) {
                s.weak_skills.push_back(st);
            } else {
                ++s.strong_skills;
            }
        }
        std::stable_sort(s.weak_skills.begin(), s.weak_skills.end(),
                         [](const SkillState& a, const SkillState& b) { return a.mastery < b.mastery; });
    } else {
        s.ability = kt::AbilityProfile{}.features;
    }
    if (candidate) {
        NextStepEstimate est{candidate->question_id, candidate->skill_id, 0.5, "bkt"};
        const std::vector<kt::Interaction> empty;
        const auto& history = snapshot ? snapshot->history : empty;
        if (model) {
            est.p_correct = model::predict_next(history, candidate->question_id, candidate->skill_id,
                                                *model)
                                .p_correct;
            est.source = "model";
        } else {
            double mastery = bkt.p_init;
            if (snapshot) {
                if (const auto it = snapshot->skills.find(candidate->skill_id);
                    it != snapshot->skills.end()) {
                    mastery = it->second.mastery;
                }
            }
            est.p_correct = kt::p_correct(mastery, bkt);
        }
        s.next_step = est;
    }
    return s;
}

}  // namespace tutorstack::rag
