#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tutorstack/model/config.hpp"
#include "tutorstack/model/encoding.hpp"
#include "tutorstack/model/parameters.hpp"
#include "tutorstack/util/random.hpp"

namespace tutorstack::model {

enum class Mode { kTrain, kInfer };

template <typename T>
struct AttentionResult {
    Matrix<T> output;               // [len x d]
    std::vector<Matrix<T>> weights;  // one [len x len] matrix per head
};

/// Depthwise 1-D convolution along the sequence axis, zero padded, centred.
/// kernel is [width x channels].
template <typename T>
Matrix<T> depthwise_conv(const Matrix<T>& x, const Matrix<T>& kernel);

/// Multi-head attention with a per-head additive distance penalty. Keys and
/// values (already projected) are masked and passed through depthwise_conv
/// before scoring; logits are q.k / sqrt(head_dim) - decay[h] * |i - j| over
/// unmasked keys. A query with no unmasked key attends to itself.
template <typename T>
AttentionResult<T> monotonic_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                       std::span<const std::uint8_t> mask,
                                       std::span<const T> decay, const Matrix<T>& conv_k,
                                       const Matrix<T>& conv_v, std::size_t heads);

/// Sinusoidal positional encoding rows [offset, offset + len).
template <typename T>
Matrix<T> positional_encoding(std::size_t len, std::size_t dim, std::size_t offset = 0);

template <typename T>
T leaky_relu(T x, T slope) {
    return x > T(0) ? x : slope * x;
}

template <typename T>
struct ForwardResult {
    Matrix<T> embedded;      // input embedding incl. positions
    Matrix<T> hidden;        // output of the last encoder block
    std::vector<T> logits;
    std::vector<T> probabilities;
};

/// The encoder stack over one parameter set. Holds references only; the
/// parameters must outlive the network.
template <typename T>
class Network {
public:
    Network(const ModelConfig& config, const ParameterSet<T>& params);

    /// Sum of the six embedding lookups plus positional encoding.
    Matrix<T> embed(const EncodedSequence& seq) const;

    /// One pre-LN block: x1 = x + Attn(LN(x)); out = x1 + FFN(LN(x1)).
    /// `rng` is required in training mode when dropout > 0.
    Matrix<T> encoder_block(const Matrix<T>& x, std::size_t layer,
                            std::span<const std::uint8_t> mask, Mode mode = Mode::kInfer,
                            Rng* rng = nullptr) const;

    ForwardResult<T> forward(const EncodedSequence& seq, Mode mode = Mode::kInfer,
                             Rng* rng = nullptr) const;

    /// Adds weight * d(sum of BCE over labelled positions)/d(params) into
    /// `grads` and returns the unweighted BCE sum. labels: -1 ignore, 0, 1.
    T accumulate_gradients(const EncodedSequence& seq, std::span<const std::int8_t> labels,
                           ParameterSet<T>& grads, T weight, Mode mode = Mode::kTrain,
                           Rng* rng = nullptr) const;

    /// Unweighted BCE sum without gradients.
    T loss(const EncodedSequence& seq, std::span<const std::int8_t> labels) const;

    /// Effective per-head decays (softplus of the raw parameter, zero for
    /// content heads).
    std::vector<T> decays(std::size_t layer) const;

private:
    struct LayerCache;
    struct Cache;

    Matrix<T> run_block(const Matrix<T>& x, std::size_t layer, std::span<const std::uint8_t> mask,
                        Mode mode, Rng* rng, LayerCache* cache) const;
    Matrix<T> backward_block(const Matrix<T>& d_out, std::size_t layer, const LayerCache& cache,
                             ParameterSet<T>& grads, std::span<const std::uint8_t> mask) const;
    ForwardResult<T> run(const EncodedSequence& seq, Mode mode, Rng* rng, Cache* cache) const;
    void check_ids(const EncodedSequence& seq) const;

    const ModelConfig& config_;
    const ParameterSet<T>& params_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace tutorstack::model
