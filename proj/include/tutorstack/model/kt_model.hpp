#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tutorstack/kt/interaction.hpp"
#include "tutorstack/model/config.hpp"
#include "tutorstack/model/encoding.hpp"
#include "tutorstack/model/network.hpp"
#include "tutorstack/model/parameters.hpp"

namespace tutorstack::model {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr const char* kManifestFile = "model.manifest.json";
inline constexpr const char* kWeightsFile = "model.weights.bin";

/// A trained model plus the featurization state it was trained with. Loaded
/// models are immutable and safe to share across threads.
class KtModel {
public:
    KtModel(ModelConfig config, Featurizer featurizer);
    KtModel(const KtModel&) = delete;
    KtModel& operator=(const KtModel&) = delete;

    const ModelConfig& config() const { return config_; }
    const ParameterLayout& layout() const { return layout_; }
    const ParameterSet<float>& params() const { return params_; }
    ParameterSet<float>& mutable_params() { return params_; }
    const Featurizer& featurizer() const { return featurizer_; }

    std::vector<std::string>& train_students() { return train_students_; }
    const std::vector<std::string>& train_students() const { return train_students_; }

    Network<float> network() const { return Network<float>(config_, params_); }

    /// Writes model.manifest.json and model.weights.bin into `dir`.
    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<KtModel> load(const std::filesystem::path& dir);

private:
    ModelConfig config_;
    ParameterLayout layout_;
    ParameterSet<float> params_;
    Featurizer featurizer_;
    std::vector<std::string> train_students_;
};

struct NextStepPrediction {
    double p_correct = 0.5;
    std::vector<kt::Interaction> appended_sequence;
};

/// Encodes `history` with a final MASK step for the candidate question, runs
/// the model and appends the thresholded prediction (>= 0.5 -> correct).
NextStepPrediction predict_next(const std::vector<kt::Interaction>& history,
                                const std::string& next_question_id,
                                const std::string& next_skill_id, const KtModel& model);

/// Same, without building the appended sequence.
double predict_probability(const std::vector<kt::Interaction>& history,
                           const std::string& next_question_id, const std::string& next_skill_id,
                           const KtModel& model);

}  // namespace tutorstack::model
