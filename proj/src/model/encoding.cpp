#include "tutorstack/model/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tutorstack::model {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i) + kFirstVocabId).second) {
            throw std::invalid_argument("duplicate vocabulary entry " + tokens_[i]);
        }
    }
}

std::int32_t Vocabulary::lookup(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? kUnk : it->second;
}

int Featurizer::difficulty_of(const std::string& question_id) const {
    return difficulty.level(question_id);
}

std::size_t Featurizer::cluster_of(const kt::FeatureVector& features) const {
    return centroids.empty() ? 0 : kt::assign_cluster(features, centroids);
}

std::vector<AnnotatedStep> Featurizer::annotate(const std::vector<kt::Interaction>& history) const {
    std::vector<AnnotatedStep> steps;
    steps.reserve(history.size());
    std::map<std::string, kt::BktBelief> mastery;
    std::size_t cluster = cluster_of(kt::ability_features({}));
    for (std::size_t t = 0; t < history.size(); ++t) {
        const auto& it = history[t];
        if (t > 0 && t % kt::kAbilityRefreshInterval == 0) {
            cluster = cluster_of(kt::ability_features(std::span(history.data(), t)));
        }
        auto [m, inserted] = mastery.try_emplace(it.skill_id, kt::BktBelief::from_mastery(bkt.p_init));
        steps.push_back({questions.lookup(it.question_id), skills.lookup(it.skill_id), it.correct,
                         m->second.mastery(), cluster, difficulty_of(it.question_id)});
        m->second = kt::bkt_step(m->second, it.correct, bkt);
    }
    return steps;
}

AnnotatedStep Featurizer::query_step(const std::vector<kt::Interaction>& history,
                                     const std::string& question_id,
                                     const std::string& skill_id) const {
    auto belief = kt::BktBelief::from_mastery(bkt.p_init);
    for (const auto& it : history) {
        if (it.skill_id == skill_id) belief = kt::bkt_step(belief, it.correct, bkt);
    }
    const double mastery = belief.mastery();
    const std::size_t refresh =
        (history.size() / kt::kAbilityRefreshInterval) * kt::kAbilityRefreshInterval;
    const auto features = kt::ability_features(std::span(history.data(), refresh));
    return {questions.lookup(question_id), skills.lookup(skill_id), std::nullopt, mastery,
            cluster_of(features), difficulty_of(question_id)};
}

std::size_t EncodedSequence::first_real() const {
    const auto it = std::find(mask.begin(), mask.end(), std::uint8_t{1});
    return static_cast<std::size_t>(it - mask.begin());
}

EncodedSequence EncodedSequence::tail(std::size_t from) const {
    from = std::min(from, length());
    auto cut = [from](const std::vector<std::int32_t>& v) {
        return std::vector<std::int32_t>(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
    };
    EncodedSequence out;
    out.question = cut(question);
    out.skill = cut(skill);
    out.response = cut(response);
    out.mastery = cut(mastery);
    out.cluster = cut(cluster);
    out.difficulty = cut(difficulty);
    out.mask.assign(mask.begin() + static_cast<std::ptrdiff_t>(from), mask.end());
    out.position_offset = position_offset + from;
    return out;
}

std::int32_t mastery_bucket(double mastery, std::size_t buckets) {
    const double scaled = std::floor(static_cast<double>(buckets) * mastery);
    return static_cast<std::int32_t>(std::clamp(scaled, 0.0, static_cast<double>(buckets - 1)));
}

EncodedSequence encode_sequence(const std::vector<AnnotatedStep>& steps,
                                const std::optional<AnnotatedStep>& query,
                                const ModelConfig& config) {
    const std::size_t len = config.max_seq_len;
    const std::size_t total = steps.size() + (query ? 1 : 0);
    const std::size_t keep = std::min(total, len);
    const std::size_t pad = len - keep;

    EncodedSequence seq;
    seq.question.assign(len, kPad);
    seq.skill.assign(len, kPad);
    seq.response.assign(len, kResponsePad);
    seq.mastery.assign(len, kPad);
    seq.cluster.assign(len, kPad);
    seq.difficulty.assign(len, kPad);
    seq.mask.assign(len, 0);

    const std::size_t first_step = total - keep;
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t src = first_step + i;
        const AnnotatedStep& step = src < steps.size() ? steps[src] : *query;
        const std::size_t pos = pad + i;
        seq.question[pos] = step.question;
        seq.skill[pos] = step.skill;
        seq.response[pos] = !step.response ? kResponseMask
                            : *step.response ? kResponseCorrect
                                             : kResponseIncorrect;
        seq.mastery[pos] = mastery_bucket(step.mastery, config.mastery_buckets) + 1;
        seq.cluster[pos] = static_cast<std::int32_t>(
            std::min(step.cluster, config.k_clusters - 1) + 1);
        seq.difficulty[pos] = std::clamp(step.difficulty, 1,
                                         static_cast<int>(config.difficulty_levels));
        seq.mask[pos] = 1;
    }
    return seq;
}

}  // namespace tutorstack::model
