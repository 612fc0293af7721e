#pragma once

#include <cstddef>
#include <cstdint>

namespace tutorstack::model {

/// Reserved token ids shared by every embedding table.
inline constexpr std::int32_t kPad = 0;
/// Question and skill tables: ids never seen in training.
inline constexpr std::int32_t kUnk = 1;
inline constexpr std::int32_t kFirstVocabId = 2;

/// Response table alphabet.
enum ResponseToken : std::int32_t {
    kResponsePad = 0,
    kResponseMask = 1,
    kResponseIncorrect = 2,
    kResponseCorrect = 3,
};
inline constexpr std::size_t kResponseVocab = 4;

struct ModelConfig {
    std::size_t embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t ffn_dim = 256;
    std::size_t max_seq_len = 128;
    std::size_t conv_kernel = 7;
    double leaky_slope = 0.01;
    double dropout = 0.1;
    std::size_t mastery_buckets = 10;
    std::size_t difficulty_levels = 10;
    std::size_t k_clusters = 5;
    /// Table sizes including PAD and UNK.
    std::size_t question_vocab = 2;
    std::size_t skill_vocab = 2;

    /// Throws std::invalid_argument on inconsistent dimensions.
    void validate() const;

    std::size_t head_dim() const { return embed_dim / num_heads; }
    /// Heads [0, content_heads()) attend on content only; the rest carry a
    /// learned distance decay.
    std::size_t content_heads() const { return num_heads / 2; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace tutorstack::model
