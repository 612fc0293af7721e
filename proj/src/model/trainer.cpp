#include "tutorstack/model/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tutorstack/sim/metrics.hpp"
#include "tutorstack/util/random.hpp"

namespace tutorstack::model {

namespace {

struct Sample {
    std::size_t student = 0;  // index into annotated histories
    std::size_t end = 0;      // one past the last step
};

struct Adam {
    std::vector<float> m;
    std::vector<float> v;
    std::size_t step = 0;

    explicit Adam(std::size_t n) : m(n, 0.0F), v(n, 0.0F) {}

    void update(std::vector<float>& params, const std::vector<float>& grads, const TrainHyper& h) {
        ++step;
        const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
        const auto b1 = static_cast<float>(h.beta1);
        const auto b2 = static_cast<float>(h.beta2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0F - b1) * grads[i];
            v[i] = b2 * v[i] + (1.0F - b2) * grads[i] * grads[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            params[i] -= static_cast<float>(h.lr * m_hat / (std::sqrt(v_hat) + h.adam_eps));
        }
    }
};

/// Window of annotated steps [end - len, end), with the final step and a
/// random subset of earlier ones masked. Returns trimmed tokens positioned so
/// that the last step sits at slot max_seq_len - 1.
EncodedSequence window(const std::vector<AnnotatedStep>& steps, std::size_t end,
                       const ModelConfig& config, double mask_ratio, Rng* rng,
                       std::vector<std::int8_t>& labels) {
    const std::size_t len = std::min(end, config.max_seq_len);
    std::vector<AnnotatedStep> slice(steps.begin() + static_cast<std::ptrdiff_t>(end - len),
                                     steps.begin() + static_cast<std::ptrdiff_t>(end));
    labels.assign(len, -1);
    for (std::size_t i = 0; i < len; ++i) {
        const bool masked = i + 1 == len || (rng != nullptr && rng->uniform() < mask_ratio);
        if (!masked) continue;
        labels[i] = *slice[i].response ? 1 : 0;
        slice[i].response.reset();
    }
    const auto full = encode_sequence(slice, std::nullopt, config);
    return full.tail(full.first_real());
}

std::vector<Sample> make_samples(const std::vector<std::vector<AnnotatedStep>>& histories,
                                 std::size_t stride) {
    std::vector<Sample> samples;
    for (std::size_t s = 0; s < histories.size(); ++s) {
        const std::size_t n = histories[s].size();
        for (std::size_t end = stride; end < n; end += stride) samples.push_back({s, end});
        if (n > 0) samples.push_back({s, n});
    }
    return samples;
}

}  // namespace

bool TrainReport::same_results(const TrainReport& other) const {
    if (seed != other.seed || best_epoch != other.best_epoch || epochs.size() != other.epochs.size()) {
        return false;
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = other.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss ||
            a.val_auc != b.val_auc) {
            return false;
        }
    }
    return true;
}

Featurizer fit_featurizer(const std::map<std::string, std::vector<kt::Interaction>>& histories,
                          std::size_t k_clusters, bool fit_bkt, std::uint64_t seed) {
    std::set<std::string> questions;
    std::set<std::string> skills;
    for (const auto& [id, history] : histories) {
        for (const auto& it : history) {
            questions.insert(it.question_id);
            skills.insert(it.skill_id);
        }
    }
    Featurizer f;
    for (const auto& [id, history] : histories) f.difficulty.observe_all(history);
    f.questions = Vocabulary({questions.begin(), questions.end()});
    f.skills = Vocabulary({skills.begin(), skills.end()});

    if (fit_bkt) {
        std::vector<std::vector<kt::Interaction>> skill_logs;
        for (const auto& [id, history] : histories) {
            std::map<std::string, std::vector<kt::Interaction>> by_skill;
            for (const auto& it : history) by_skill[it.skill_id].push_back(it);
            for (auto& [skill, log] : by_skill) skill_logs.push_back(std::move(log));
        }
        f.bkt = kt::fit_bkt_params(skill_logs);
    }

    std::vector<kt::FeatureVector> points;
    for (const auto& [id, history] : histories) {
        for (std::size_t t = kt::kAbilityRefreshInterval; t <= history.size();
             t += kt::kAbilityRefreshInterval) {
            points.push_back(kt::ability_features(std::span(history.data(), t)));
        }
        points.push_back(kt::ability_features({}));
    }
    f.centroids = kt::kmeans_fit(points, std::min(k_clusters, points.size()), seed).centroids;
    return f;
}

TrainResult train(const std::vector<kt::Interaction>& dataset, ModelConfig config,
                  const TrainHyper& hyper, const EpochCallback& on_epoch) {
    const auto started = std::chrono::steady_clock::now();
    auto by_student = kt::group_by_student(dataset);
    if (by_student.size() < 2) throw std::invalid_argument("training needs at least two students");
    if (hyper.batch == 0) throw std::invalid_argument("batch size must be >= 1");

    Rng rng(hyper.seed);
    std::vector<std::string> ids;
    for (const auto& [id, h] : by_student) ids.push_back(id);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    const auto val_count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(hyper.val_fraction * static_cast<double>(ids.size()))),
        1, ids.size() - 1);
    std::map<std::string, std::vector<kt::Interaction>> train_histories;
    std::map<std::string, std::vector<kt::Interaction>> val_histories;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& dest = i < val_count ? val_histories : train_histories;
        dest[ids[i]] = std::move(by_student[ids[i]]);
    }

    auto featurizer = fit_featurizer(train_histories, config.k_clusters, hyper.fit_bkt, hyper.seed);
    config.question_vocab = featurizer.questions.table_size();
    config.skill_vocab = featurizer.skills.table_size();
    TrainResult result;
    result.model = std::make_unique<KtModel>(config, featurizer);
    for (const auto& [id, h] : train_histories) result.model->train_students().push_back(id);
    initialize(result.model->mutable_params(), config, hyper.seed);

    const auto& f = result.model->featurizer();
    std::vector<std::vector<AnnotatedStep>> train_steps;
    for (const auto& [id, h] : train_histories) train_steps.push_back(f.annotate(h));
    std::vector<std::vector<AnnotatedStep>> val_steps;
    for (const auto& [id, h] : val_histories) val_steps.push_back(f.annotate(h));

    auto samples = make_samples(train_steps, hyper.window_stride);
    std::vector<Sample> val_samples;
    for (std::size_t s = 0; s < val_steps.size(); ++s) {
        for (std::size_t end = 1; end <= val_steps[s].size(); end += hyper.val_stride) {
            val_samples.push_back({s, end});
        }
    }

    auto& params = result.model->mutable_params();
    ParameterSet<float> grads(result.model->layout());
    Adam adam(params.values().size());
    std::vector<float> best = params.values();
    double best_auc = -1.0;
    std::size_t since_best = 0;
    result.report.seed = hyper.seed;

    std::vector<std::int8_t> labels;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        for (std::size_t i = samples.size(); i > 1; --i) {
            std::swap(samples[i - 1], samples[rng.below(i)]);
        }
        double loss_sum = 0.0;
        std::size_t target_count = 0;
        const Network<float> net(result.model->config(), params);
        for (std::size_t b0 = 0; b0 < samples.size(); b0 += hyper.batch) {
            const std::size_t b1 = std::min(samples.size(), b0 + hyper.batch);
            std::vector<EncodedSequence> seqs;
            std::vector<std::vector<std::int8_t>> batch_labels;
            std::size_t batch_targets = 0;
            for (std::size_t i = b0; i < b1; ++i) {
                seqs.push_back(window(train_steps[samples[i].student], samples[i].end, config,
                                      hyper.mask_ratio, &rng, labels));
                batch_targets += static_cast<std::size_t>(
                    std::count_if(labels.begin(), labels.end(), [](auto l) { return l >= 0; }));
                batch_labels.push_back(labels);
            }
            grads.set_zero();
            const float weight = 1.0F / static_cast<float>(batch_targets);
            for (std::size_t i = 0; i < seqs.size(); ++i) {
                loss_sum += net.accumulate_gradients(seqs[i], batch_labels[i], grads, weight,
                                                     Mode::kTrain, &rng);
            }
            target_count += batch_targets;
            double norm = 0.0;
            for (const float g : grads.values()) norm += static_cast<double>(g) * g;
            norm = std::sqrt(norm);
            if (norm > hyper.clip_norm) {
                const auto scale = static_cast<float>(hyper.clip_norm / norm);
                for (float& g : grads.values()) g *= scale;
            }
            adam.update(params.values(), grads.values(), hyper);
        }

        std::vector<double> val_scores;
        std::vector<bool> val_labels;
        for (const auto& s : val_samples) {
            const auto seq = window(val_steps[s.student], s.end, config, 0.0, nullptr, labels);
            val_scores.push_back(static_cast<double>(net.forward(seq).probabilities.back()));
            val_labels.push_back(labels.back() == 1);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, target_count));
        stats.val_loss = val_scores.empty() ? 0.0 : sim::log_loss(val_scores, val_labels);
        try {
            stats.val_auc = sim::auc(val_scores, val_labels);
        } catch (const sim::UndefinedAucError&) {
            stats.val_auc = 0.5;
        }
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        }
        result.report.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
        if (stats.val_auc > best_auc) {
            best_auc = stats.val_auc;
            best = params.values();
            result.report.best_epoch = epoch;
            since_best = 0;
        } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
            break;
        }
    }
    params.values() = std::move(best);
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace tutorstack::model
