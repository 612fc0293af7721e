#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "tutorstack/kt/interaction.hpp"
#include "tutorstack/model/kt_model.hpp"

namespace tutorstack::model {

struct TrainHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    std::size_t batch = 64;
    std::size_t epochs = 30;
    double mask_ratio = 0.15;
    std::uint64_t seed = 42;
    double val_fraction = 0.1;
    /// Training windows end every `window_stride` steps (and at the end).
    std::size_t window_stride = 32;
    /// Validation predicts every `val_stride`-th step of each held-out student.
    std::size_t val_stride = 4;
    /// Stop after this many epochs without a validation AUC improvement; 0 disables.
    std::size_t patience = 5;
    /// Grid-fit BKT parameters on the training split instead of the defaults.
    bool fit_bkt = false;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.5;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;

    /// Compares everything except wall_seconds, which is a measurement.
    bool same_results(const TrainReport& other) const;
};

struct TrainResult {
    std::unique_ptr<KtModel> model;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Masked-response training: splits students 90/10 (seeded), fits the
/// featurizer on the training split and returns the best-validation-AUC model.
/// Throws std::invalid_argument for datasets with fewer than two students.
TrainResult train(const std::vector<kt::Interaction>& dataset, ModelConfig config,
                  const TrainHyper& hyper, const EpochCallback& on_epoch = {});

/// Builds the featurizer (vocabularies, difficulty table, BKT params,
/// ability centroids) from training histories.
Featurizer fit_featurizer(const std::map<std::string, std::vector<kt::Interaction>>& histories,
                          std::size_t k_clusters, bool fit_bkt, std::uint64_t seed);

}  // namespace tutorstack::model
