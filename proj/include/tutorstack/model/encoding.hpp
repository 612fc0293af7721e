#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tutorstack/kt/ability.hpp"
#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/kt/difficulty.hpp"
#include "tutorstack/kt/interaction.hpp"
#include "tutorstack/model/config.hpp"

namespace tutorstack::model {

/// String id -> token id. Ids start at kFirstVocabId; unknown ids map to kUnk.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);

    std::int32_t lookup(const std::string& id) const;
    /// Table size including PAD and UNK.
    std::size_t table_size() const { return tokens_.size() + kFirstVocabId; }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::int32_t> index_;
};

/// One position's latent relations, computed from the history strictly before it.
struct AnnotatedStep {
    std::int32_t question = kUnk;
    std::int32_t skill = kUnk;
    std::optional<bool> response;  // nullopt renders as MASK
    double mastery = 0.0;
    std::size_t cluster = 0;
    int difficulty = kt::kDefaultDifficulty;
};

/// Everything needed to turn raw interactions into model tokens.
struct Featurizer {
    Vocabulary questions;
    Vocabulary skills;
    kt::BktParams bkt;
    std::vector<kt::FeatureVector> centroids;
    kt::DifficultyTable difficulty;  // per-question counts from training data

    /// Annotates every step of one student's sorted history.
    std::vector<AnnotatedStep> annotate(const std::vector<kt::Interaction>& history) const;

    /// The masked step that asks about the next interaction.
    AnnotatedStep query_step(const std::vector<kt::Interaction>& history,
                             const std::string& question_id, const std::string& skill_id) const;

    int difficulty_of(const std::string& question_id) const;
    std::size_t cluster_of(const kt::FeatureVector& features) const;
};

struct EncodedSequence {
    std::vector<std::int32_t> question;
    std::vector<std::int32_t> skill;
    std::vector<std::int32_t> response;
    std::vector<std::int32_t> mastery;
    std::vector<std::int32_t> cluster;
    std::vector<std::int32_t> difficulty;
    std::vector<std::uint8_t> mask;  // 1 = real position, 0 = PAD
    /// Absolute position of element 0; non-zero only for trimmed views.
    std::size_t position_offset = 0;

    std::size_t length() const { return mask.size(); }
    std::size_t first_real() const;
    /// The suffix starting at `from`, keeping absolute positions.
    EncodedSequence tail(std::size_t from) const;
};

/// Mastery bucket floor(buckets * mastery), clamped to [0, buckets - 1].
std::int32_t mastery_bucket(double mastery, std::size_t buckets = 10);

/// Keeps the most recent steps (plus the optional query at the end) up to
/// max_seq_len and left-pads with PAD to exactly max_seq_len positions.
EncodedSequence encode_sequence(const std::vector<AnnotatedStep>& steps,
                                const std::optional<AnnotatedStep>& query,
                                const ModelConfig& config);

}  // namespace tutorstack::model
