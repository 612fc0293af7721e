#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tutorstack/kt/feature_store.hpp"
#include "tutorstack/model/kt_model.hpp"
#include "tutorstack/rag/skill_catalog.hpp"

namespace tutorstack::rag {

inline constexpr double kWeakThreshold = 0.6;

struct SkillState {
    std::string skill_id;
    std::string name;
    double mastery = 0.0;
    std::size_t observations = 0;
};

struct NextStepEstimate {
    std::string question_id;
    std::string skill_id;
    double p_correct = 0.5;
    std::string source;  // "model" or "bkt"
};

struct LearnerStateSummary {
    std::string student_id;
    bool new_student = false;
    std::size_t interactions = 0;
    std::size_t cluster_id = 0;
    std::vector<double> ability;
    double weak_threshold = kWeakThreshold;
    std::vector<SkillState> weak_skills;  // ascending mastery, then skill id
    std::size_t strong_skills = 0;
    std::vector<SkillState> skills;  // every observed skill, by skill id
    std::optional<NextStepEstimate> next_step;

    /// Deterministic prose rendering used inside prompts.
    std::string render_text() const;
    nlohmann::json to_json() const;
};

struct Candidate {
    std::string question_id;
    std::string skill_id;
};

/// Builds the learner summary from a feature-store snapshot. A missing
/// snapshot gives the empty `new_student` summary. With a candidate, the
/// next-step probability comes from the model when one is loaded and from
/// the skill's BKT predictive probability otherwise.
LearnerStateSummary summarize_state(const std::string& student_id,
                                    const std::optional<kt::StudentSnapshot>& snapshot,
                                    const kt::BktParams& bkt, const SkillCatalog& catalog,
                                    const model::KtModel* model,
                                    const std::optional<Candidate>& candidate,
                                    double weak_threshold = kWeakThreshold);

}  // namespace tutorstack::rag
