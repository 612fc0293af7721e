#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tutorstack/kt/interaction.hpp"
#include "tutorstack/model/kt_model.hpp"
#include "tutorstack/sim/simulator.hpp"

namespace tutorstack::sim {

struct EvalReport {
    double model_auc = 0.5;
    double baseline_auc = 0.5;
    std::optional<double> ceiling_auc;
    double accuracy = 0.0;
    double log_loss = 0.0;
    std::size_t test_students = 0;
    std::size_t predictions = 0;

    std::string to_json() const;
};

/// Predicts p(correct) for `next` given the student's earlier interactions.
using Predictor =
    std::function<double(const std::vector<kt::Interaction>& prefix, const kt::Interaction& next)>;

/// Per-question success rate from training counts; unseen questions fall back
/// to the pooled rate.
Predictor per_question_mean(const kt::DifficultyTable& training_counts);

/// Looks up ground-truth probabilities by (student, step).
Predictor ground_truth_predictor(const std::vector<GroundTruth>& truth);

/// Scores `predictor` at every test interaction from its prefix, alongside the
/// per-question baseline and (when given) the ground-truth ceiling.
EvalReport evaluate(const Predictor& predictor, const std::vector<kt::Interaction>& test,
                    const kt::DifficultyTable& training_counts,
                    const std::vector<GroundTruth>* truth = nullptr);

/// evaluate() with the model's predict_next. Rejects test students that the
/// checkpoint was trained on.
EvalReport eval_kt(const model::KtModel& model, const std::vector<kt::Interaction>& test,
                   const std::vector<GroundTruth>* truth = nullptr);

}  // namespace tutorstack::sim
