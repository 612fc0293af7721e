#include "tutorstack/sim/evaluation.hpp"

#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "tutorstack/sim/metrics.hpp"

namespace tutorstack::sim {

std::string EvalReport::to_json() const {
    nlohmann::json j = {{"model_auc", model_auc},
                        {"baseline_auc", baseline_auc},
                        {"ceiling_auc", ceiling_auc ? nlohmann::json(*ceiling_auc) : nlohmann::json()},
                        {"accuracy", accuracy},
                        {"log_loss", log_loss},
                        {"test_students", test_students},
                        {"predictions", predictions}};
    return j.dump(2);
}

Predictor per_question_mean(const kt::DifficultyTable& training_counts) {
    std::int64_t attempts = 0;
    std::int64_t successes = 0;
    std::map<std::string, double> rate;
    for (const auto& [q, e] : training_counts.entries()) {
        attempts += e.attempts;
        successes += e.successes;
        if (e.attempts > 0) {
            rate[q] = static_cast<double>(e.successes) / static_cast<double>(e.attempts);
        }
    }
    const double pooled =
        attempts > 0 ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.5;
    return [rate = std::move(rate), pooled](const std::vector<kt::Interaction>&,
                                            const kt::Interaction& next) {
        const auto it = rate.find(next.question_id);
        return it == rate.end() ? pooled : it->second;
    };
}

Predictor ground_truth_predictor(const std::vector<GroundTruth>& truth) {
    std::map<std::pair<std::string, std::size_t>, double> table;
    for (const auto& t : truth) table[{t.student_id, t.step}] = t.p_correct;
    return [table = std::move(table)](const std::vector<kt::Interaction>& prefix,
                                      const kt::Interaction& next) {
        const auto it = table.find({next.student_id, prefix.size()});
        if (it == table.end()) {
            throw std::invalid_argument("no ground truth for " + next.student_id + " step " +
                                        std::to_string(prefix.size()));
        }
        return it->second;
    };
}

namespace {

double auc_or_half(const std::vector<double>& scores, const std::vector<bool>& labels) {
    try {
        return auc(scores, labels);
    } catch (const UndefinedAucError&) {
        return 0.5;
    }
}

}  // namespace

EvalReport evaluate(const Predictor& predictor, const std::vector<kt::Interaction>& test,
                    const kt::DifficultyTable& training_counts,
                    const std::vector<GroundTruth>* truth) {
    const auto baseline = per_question_mean(training_counts);
    std::optional<Predictor> ceiling;
    if (truth) ceiling = ground_truth_predictor(*truth);

    std::vector<double> model_scores;
    std::vector<double> baseline_scores;
    std::vector<double> ceiling_scores;
    std::vector<bool> labels;
    const auto by_student = kt::group_by_student(test);
    for (const auto& [id, history] : by_student) {
        std::vector<kt::Interaction> prefix;
        prefix.reserve(history.size());
        for (const auto& it : history) {
            model_scores.push_back(predictor(prefix, it));
            baseline_scores.push_back(baseline(prefix, it));
            if (ceiling) ceiling_scores.push_back((*ceiling)(prefix, it));
            labels.push_back(it.correct);
            prefix.push_back(it);
        }
    }
    if (labels.empty()) throw std::invalid_argument("evaluation set is empty");
    EvalReport report;
    report.model_auc = auc(model_scores, labels);
    report.baseline_auc = auc_or_half(baseline_scores, labels);
    if (ceiling) report.ceiling_auc = auc(ceiling_scores, labels);
    report.accuracy = accuracy(model_scores, labels);
    report.log_loss = log_loss(model_scores, labels);
    report.test_students = by_student.size();
    report.predictions = labels.size();
    return report;
}

EvalReport eval_kt(const model::KtModel& model, const std::vector<kt::Interaction>& test,
                   const std::vector<GroundTruth>* truth) {
    const std::set<std::string> trained(model.train_students().begin(),
                                        model.train_students().end());
    for (const auto& it : test) {
        if (trained.contains(it.student_id)) {
            throw std::invalid_argument("test student " + it.student_id +
                                        " was part of the training set");
        }
    }
    const Predictor predictor = [&model](const std::vector<kt::Interaction>& prefix,
                                         const kt::Interaction& next) {
        return model::predict_probability(prefix, next.question_id, next.skill_id, model);
    };
    return evaluate(predictor, test, model.featurizer().difficulty, truth);
}

}  // namespace tutorstack::sim
