#include "tutorstack/model/network.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tutorstack::model {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
struct NormCache {
    Matrix<T> xhat;
    Vector<T> rstd;
};

template <typename T, typename G, typename B>
Matrix<T> layer_norm(const Matrix<T>& x, const G& gamma, const B& beta, NormCache<T>* cache) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    Matrix<T> xhat(rows, cols);
    Vector<T> rstd(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const T mean = x.row(i).mean();
        const T var = (x.row(i).array() - mean).square().mean();
        rstd(i) = T(1) / std::sqrt(var + T(kLayerNormEps));
        xhat.row(i) = (x.row(i).array() - mean) * rstd(i);
    }
    Matrix<T> y = (xhat.array().rowwise() * gamma.row(0).array()).matrix();
    y.rowwise() += beta.row(0);
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

template <typename T, typename G, typename DG, typename DB>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const NormCache<T>& cache, const G& gamma,
                              DG&& dgamma, DB&& dbeta) {
    dgamma.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbeta.row(0) += dy.colwise().sum();
    const Matrix<T> dxhat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
    Matrix<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const T mean_d = dxhat.row(i).mean();
        const T mean_dx = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
        dx.row(i) = cache.rstd(i) *
                    (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx).matrix();
    }
    return dx;
}

template <typename T, typename K>
void conv_backward(const Matrix<T>& d_out, const Matrix<T>& x, const K& kernel, Matrix<T>& dx,
                   Matrix<T>& dkernel) {
    const auto len = x.rows();
    const auto radius = kernel.rows() / 2;
    dx.setZero(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < kernel.rows(); ++t) {
        const Eigen::Index shift = t - radius;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index hi = std::min<Eigen::Index>(len, len - shift);
        if (hi <= lo) continue;
        const auto n = hi - lo;
        dkernel.row(t) += (d_out.middleRows(lo, n).array() * x.middleRows(lo + shift, n).array())
                              .colwise()
                              .sum()
                              .matrix();
        dx.middleRows(lo + shift, n).array() +=
            d_out.middleRows(lo, n).array().rowwise() * kernel.row(t).array();
    }
}

template <typename T, typename K>
Matrix<T> conv_forward(const Matrix<T>& x, const K& kernel) {
    const auto len = x.rows();
    const auto radius = kernel.rows() / 2;
    Matrix<T> out = Matrix<T>::Zero(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < kernel.rows(); ++t) {
        const Eigen::Index shift = t - radius;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index hi = std::min<Eigen::Index>(len, len - shift);
        if (hi <= lo) continue;
        out.middleRows(lo, hi - lo).array() +=
            x.middleRows(lo + shift, hi - lo).array().rowwise() * kernel.row(t).array();
    }
    return out;
}

template <typename T>
void zero_masked_rows(Matrix<T>& x, std::span<const std::uint8_t> mask) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) x.row(i).setZero();
    }
}

/// Scores, masks and normalizes; returns the concatenated head outputs.
template <typename T>
Matrix<T> attend(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                 std::span<const std::uint8_t> mask, std::span<const T> decay, std::size_t heads,
                 std::vector<Matrix<T>>& weights) {
    const Eigen::Index len = q.rows();
    const auto head_dim = static_cast<Eigen::Index>(q.cols() / static_cast<Eigen::Index>(heads));
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
    Matrix<T> out(len, q.cols());
    weights.assign(heads, Matrix<T>());
    for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
        Matrix<T> s = (q.middleCols(c0, head_dim) * k.middleCols(c0, head_dim).transpose()) * scale;
        for (Eigen::Index i = 0; i < len; ++i) {
            T row_max = -std::numeric_limits<T>::infinity();
            for (Eigen::Index j = 0; j < len; ++j) {
                if (!mask[static_cast<std::size_t>(j)]) continue;
                s(i, j) -= decay[h] * static_cast<T>(std::abs(i - j));
                row_max = std::max(row_max, s(i, j));
            }
            if (row_max == -std::numeric_limits<T>::infinity()) {
                s.row(i).setZero();
                s(i, i) = T(1);
                continue;
            }
            T total = T(0);
            for (Eigen::Index j = 0; j < len; ++j) {
                const T w = mask[static_cast<std::size_t>(j)] ? std::exp(s(i, j) - row_max) : T(0);
                s(i, j) = w;
                total += w;
            }
            s.row(i) /= total;
        }
        out.middleCols(c0, head_dim) = s * v.middleCols(c0, head_dim);
        weights[h] = std::move(s);
    }
    return out;
}

template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix<T> m(rows, cols);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform() < rate ? T(0) : keep_scale;
    }
    return m;
}

}  // namespace

template <typename T>
Matrix<T> depthwise_conv(const Matrix<T>& x, const Matrix<T>& kernel) {
    if (x.cols() != kernel.cols()) throw std::invalid_argument("depthwise_conv: channel mismatch");
    if (kernel.rows() % 2 == 0) throw std::invalid_argument("depthwise_conv: kernel must be odd");
    return conv_forward(x, kernel);
}

template <typename T>
AttentionResult<T> monotonic_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                       std::span<const std::uint8_t> mask,
                                       std::span<const T> decay, const Matrix<T>& conv_k,
                                       const Matrix<T>& conv_v, std::size_t heads) {
    if (heads == 0 || q.cols() % static_cast<Eigen::Index>(heads) != 0) {
        throw std::invalid_argument("monotonic_attention: width not divisible by heads");
    }
    if (k.rows() != q.rows() || v.rows() != q.rows() || k.cols() != q.cols() ||
        v.cols() != q.cols() || mask.size() != static_cast<std::size_t>(q.rows()) ||
        decay.size() != heads) {
        throw std::invalid_argument("monotonic_attention: dimension mismatch");
    }
    for (const T d : decay) {
        if (!(d >= T(0))) throw std::invalid_argument("monotonic_attention: decay must be >= 0");
    }
    Matrix<T> km = k;
    Matrix<T> vm = v;
    zero_masked_rows(km, mask);
    zero_masked_rows(vm, mask);
    AttentionResult<T> result;
    result.output = attend<T>(q, depthwise_conv(km, conv_k), depthwise_conv(vm, conv_v), mask,
                              decay, heads, result.weights);
    return result;
}

template <typename T>
Matrix<T> positional_encoding(std::size_t len, std::size_t dim, std::size_t offset) {
    Matrix<T> pe(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(dim));
    for (std::size_t p = 0; p < len; ++p) {
        const double pos = static_cast<double>(p + offset);
        for (std::size_t i = 0; i < dim; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) /
                                                      static_cast<double>(dim));
            pe(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) =
                static_cast<T>(i % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq));
        }
    }
    return pe;
}

template <typename T>
struct Network<T>::LayerCache {
    Matrix<T> x_in;
    NormCache<T> ln1;
    Matrix<T> y1, q, kp, vp, k, v, heads_out;
    std::vector<Matrix<T>> weights;
    Matrix<T> drop_attn;
    Matrix<T> x1;
    NormCache<T> ln2;
    Matrix<T> y2, h, g;
    Matrix<T> drop_ffn;
};

template <typename T>
struct Network<T>::Cache {
    std::vector<LayerCache> layers;
    NormCache<T> head_norm;
    Matrix<T> z;
};

template <typename T>
Network<T>::Network(const ModelConfig& config, const ParameterSet<T>& params)
    : config_(config), params_(params) {
    config_.validate();
}

template <typename T>
void Network<T>::check_ids(const EncodedSequence& seq) const {
    const std::size_t len = seq.length();
    if (seq.question.size() != len || seq.skill.size() != len || seq.response.size() != len ||
        seq.mastery.size() != len || seq.cluster.size() != len || seq.difficulty.size() != len) {
        throw std::invalid_argument("encoded sequence channels differ in length");
    }
    if (len == 0) throw std::invalid_argument("encoded sequence is empty");
    if (seq.position_offset + len > config_.max_seq_len) {
        throw std::invalid_argument("sequence longer than max_seq_len");
    }
    auto check = [](const std::vector<std::int32_t>& ids, std::size_t table, const char* what) {
        for (const auto id : ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= table) {
                throw std::out_of_range(std::string(what) + " id " + std::to_string(id) +
                                        " out of range [0," + std::to_string(table) + ")");
            }
        }
    };
    check(seq.question, config_.question_vocab, "question");
    check(seq.skill, config_.skill_vocab, "skill");
    check(seq.response, kResponseVocab, "response");
    check(seq.mastery, config_.mastery_buckets + 1, "mastery");
    check(seq.cluster, config_.k_clusters + 1, "cluster");
    check(seq.difficulty, config_.difficulty_levels + 1, "difficulty");
}

template <typename T>
Matrix<T> Network<T>::embed(const EncodedSequence& seq) const {
    check_ids(seq);
    const std::size_t len = seq.length();
    Matrix<T> x = positional_encoding<T>(len, config_.embed_dim, seq.position_offset);
    const auto eq = params_["emb.question"];
    const auto es = params_["emb.skill"];
    const auto er = params_["emb.response"];
    const auto em = params_["emb.mastery"];
    const auto ec = params_["emb.cluster"];
    const auto ed = params_["emb.difficulty"];
    for (std::size_t i = 0; i < len; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x.row(r) += eq.row(seq.question[i]) + es.row(seq.skill[i]) + er.row(seq.response[i]) +
                    em.row(seq.mastery[i]) + ec.row(seq.cluster[i]) + ed.row(seq.difficulty[i]);
    }
    return x;
}

template <typename T>
std::vector<T> Network<T>::decays(std::size_t layer) const {
    const auto raw = params_[layer_param(layer, "attn.decay")];
    std::vector<T> out(config_.num_heads, T(0));
    for (std::size_t h = config_.content_heads(); h < config_.num_heads; ++h) {
        out[h] = softplus(raw(0, static_cast<Eigen::Index>(h)));
    }
    return out;
}

template <typename T>
Matrix<T> Network<T>::run_block(const Matrix<T>& x, std::size_t layer,
                                std::span<const std::uint8_t> mask, Mode mode, Rng* rng,
                                LayerCache* cache) const {
    auto p = [&](const char* name) { return params_[layer_param(layer, name)]; };
    const bool dropping = mode == Mode::kTrain && config_.dropout > 0.0;
    if (dropping && rng == nullptr) throw std::invalid_argument("training mode needs an rng");

    NormCache<T> ln1;
    Matrix<T> y1 = layer_norm<T>(x, p("ln1.gamma"), p("ln1.beta"), &ln1);
    Matrix<T> q = y1 * p("attn.wq");
    q.rowwise() += p("attn.bq").row(0);
    Matrix<T> kp = y1 * p("attn.wk");
    kp.rowwise() += p("attn.bk").row(0);
    Matrix<T> vp = y1 * p("attn.wv");
    vp.rowwise() += p("attn.bv").row(0);
    zero_masked_rows(kp, mask);
    zero_masked_rows(vp, mask);
    Matrix<T> k = conv_forward(kp, p("attn.conv_k"));
    Matrix<T> v = conv_forward(vp, p("attn.conv_v"));
    const auto decay = decays(layer);
    std::vector<Matrix<T>> weights;
    Matrix<T> heads_out = attend<T>(q, k, v, mask, decay, config_.num_heads, weights);
    Matrix<T> attn = heads_out * p("attn.wo");
    attn.rowwise() += p("attn.bo").row(0);
    Matrix<T> drop_attn;
    if (dropping) {
        drop_attn = dropout_mask<T>(attn.rows(), attn.cols(), config_.dropout, *rng);
        attn.array() *= drop_attn.array();
    }
    Matrix<T> x1 = x + attn;

    NormCache<T> ln2;
    Matrix<T> y2 = layer_norm<T>(x1, p("ln2.gamma"), p("ln2.beta"), &ln2);
    Matrix<T> h = y2 * p("ffn.w1");
    h.rowwise() += p("ffn.b1").row(0);
    const T slope = static_cast<T>(config_.leaky_slope);
    Matrix<T> g = h.unaryExpr([slope](T value) { return leaky_relu(value, slope); });
    Matrix<T> f = g * p("ffn.w2");
    f.rowwise() += p("ffn.b2").row(0);
    Matrix<T> drop_ffn;
    if (dropping) {
        drop_ffn = dropout_mask<T>(f.rows(), f.cols(), config_.dropout, *rng);
        f.array() *= drop_ffn.array();
    }
    Matrix<T> out = x1 + f;
    if (!out.allFinite()) {
        throw std::runtime_error("non-finite activation in encoder block " + std::to_string(layer) +
                                 " (attention max |w| " +
                                 std::to_string(static_cast<double>(attn.cwiseAbs().maxCoeff())) +
                                 ")");
    }
    if (cache) {
        cache->x_in = x;
        cache->ln1 = std::move(ln1);
        cache->y1 = std::move(y1);
        cache->q = std::move(q);
        cache->kp = std::move(kp);
        cache->vp = std::move(vp);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->heads_out = std::move(heads_out);
        cache->weights = std::move(weights);
        cache->drop_attn = std::move(drop_attn);
        cache->x1 = std::move(x1);
        cache->ln2 = std::move(ln2);
        cache->y2 = std::move(y2);
        cache->h = std::move(h);
        cache->g = std::move(g);
        cache->drop_ffn = std::move(drop_ffn);
    }
    return out;
}

template <typename T>
Matrix<T> Network<T>::backward_block(const Matrix<T>& d_out, std::size_t layer,
                                     const LayerCache& c, ParameterSet<T>& grads,
                                     std::span<const std::uint8_t> mask) const {
    auto p = [&](const char* name) { return params_[layer_param(layer, name)]; };
    auto gp = [&](const char* name) { return grads[layer_param(layer, name)]; };
    const T slope = static_cast<T>(config_.leaky_slope);

    // FFN branch.
    Matrix<T> df = d_out;
    if (c.drop_ffn.size() > 0) df.array() *= c.drop_ffn.array();
    gp("ffn.w2") += c.g.transpose() * df;
    gp("ffn.b2").row(0) += df.colwise().sum();
    Matrix<T> dh = df * p("ffn.w2").transpose();
    dh.array() *= c.h.unaryExpr([slope](T value) { return value > T(0) ? T(1) : slope; }).array();
    gp("ffn.w1") += c.y2.transpose() * dh;
    gp("ffn.b1").row(0) += dh.colwise().sum();
    const Matrix<T> dy2 = dh * p("ffn.w1").transpose();
    Matrix<T> dx1 = d_out + layer_norm_backward<T>(dy2, c.ln2, p("ln2.gamma"), gp("ln2.gamma"),
                                                    gp("ln2.beta"));

    // Attention branch.
    Matrix<T> dattn = dx1;
    if (c.drop_attn.size() > 0) dattn.array() *= c.drop_attn.array();
    gp("attn.wo") += c.heads_out.transpose() * dattn;
    gp("attn.bo").row(0) += dattn.colwise().sum();
    const Matrix<T> dheads = dattn * p("attn.wo").transpose();

    const Eigen::Index len = c.q.rows();
    const auto head_dim = static_cast<Eigen::Index>(config_.head_dim());
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
    Matrix<T> dq = Matrix<T>::Zero(len, c.q.cols());
    Matrix<T> dk = Matrix<T>::Zero(len, c.q.cols());
    Matrix<T> dv = Matrix<T>::Zero(len, c.q.cols());
    auto raw_decay = p("attn.decay");
    auto d_raw_decay = gp("attn.decay");
    for (std::size_t hd = 0; hd < config_.num_heads; ++hd) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(hd) * head_dim;
        const Matrix<T>& a = c.weights[hd];
        const auto do_h = dheads.middleCols(c0, head_dim);
        const Matrix<T> da = do_h * c.v.middleCols(c0, head_dim).transpose();
        dv.middleCols(c0, head_dim) += a.transpose() * do_h;
        Matrix<T> ds =
            (a.array() * (da.array().colwise() - (a.array() * da.array()).rowwise().sum())).matrix();
        if (hd >= config_.content_heads()) {
            T d_decay = T(0);
            for (Eigen::Index i = 0; i < len; ++i) {
                for (Eigen::Index j = 0; j < len; ++j) {
                    d_decay -= ds(i, j) * static_cast<T>(std::abs(i - j));
                }
            }
            const auto hi = static_cast<Eigen::Index>(hd);
            d_raw_decay(0, hi) += d_decay * sigmoid(raw_decay(0, hi));
        }
        ds *= scale;
        dq.middleCols(c0, head_dim) += ds * c.k.middleCols(c0, head_dim);
        dk.middleCols(c0, head_dim) += ds.transpose() * c.q.middleCols(c0, head_dim);
    }

    Matrix<T> dkp;
    Matrix<T> dvp;
    Matrix<T> dconv_k = Matrix<T>::Zero(static_cast<Eigen::Index>(config_.conv_kernel), c.q.cols());
    Matrix<T> dconv_v = dconv_k;
    conv_backward(dk, c.kp, p("attn.conv_k"), dkp, dconv_k);
    conv_backward(dv, c.vp, p("attn.conv_v"), dvp, dconv_v);
    gp("attn.conv_k") += dconv_k;
    gp("attn.conv_v") += dconv_v;
    zero_masked_rows(dkp, mask);
    zero_masked_rows(dvp, mask);

    gp("attn.wq") += c.y1.transpose() * dq;
    gp("attn.bq").row(0) += dq.colwise().sum();
    gp("attn.wk") += c.y1.transpose() * dkp;
    gp("attn.bk").row(0) += dkp.colwise().sum();
    gp("attn.wv") += c.y1.transpose() * dvp;
    gp("attn.bv").row(0) += dvp.colwise().sum();
    const Matrix<T> dy1 = dq * p("attn.wq").transpose() + dkp * p("attn.wk").transpose() +
                          dvp * p("attn.wv").transpose();
    return dx1 + layer_norm_backward<T>(dy1, c.ln1, p("ln1.gamma"), gp("ln1.gamma"), gp("ln1.beta"));
}

template <typename T>
Matrix<T> Network<T>::encoder_block(const Matrix<T>& x, std::size_t layer,
                                    std::span<const std::uint8_t> mask, Mode mode, Rng* rng) const {
    if (x.cols() != static_cast<Eigen::Index>(config_.embed_dim) ||
        mask.size() != static_cast<std::size_t>(x.rows())) {
        throw std::invalid_argument("encoder_block: dimension mismatch");
    }
    return run_block(x, layer, mask, mode, rng, nullptr);
}

template <typename T>
ForwardResult<T> Network<T>::run(const EncodedSequence& seq, Mode mode, Rng* rng,
                                 Cache* cache) const {
    ForwardResult<T> result;
    result.embedded = embed(seq);
    const std::span<const std::uint8_t> mask(seq.mask);
    if (cache) cache->layers.resize(config_.num_layers);
    Matrix<T> x = result.embedded;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        x = run_block(x, l, mask, mode, rng, cache ? &cache->layers[l] : nullptr);
    }
    NormCache<T> norm;
    Matrix<T> z = layer_norm<T>(x, params_["head.ln.gamma"], params_["head.ln.beta"], &norm);
    const Vector<T> logits =
        (z * params_["head.w"]).col(0).array() + params_["head.b"](0, 0);
    result.logits.assign(logits.data(), logits.data() + logits.size());
    result.probabilities.resize(result.logits.size());
    for (std::size_t i = 0; i < result.logits.size(); ++i) {
        result.probabilities[i] = sigmoid(result.logits[i]);
    }
    result.hidden = std::move(x);
    if (cache) {
        cache->head_norm = std::move(norm);
        cache->z = std::move(z);
    }
    return result;
}

template <typename T>
ForwardResult<T> Network<T>::forward(const EncodedSequence& seq, Mode mode, Rng* rng) const {
    return run(seq, mode, rng, nullptr);
}

template <typename T>
T Network<T>::loss(const EncodedSequence& seq, std::span<const std::int8_t> labels) const {
    const auto out = run(seq, Mode::kInfer, nullptr, nullptr);
    T total = T(0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        total += labels[i] ? softplus(-out.logits[i]) : softplus(out.logits[i]);
    }
    return total;
}

template <typename T>
T Network<T>::accumulate_gradients(const EncodedSequence& seq, std::span<const std::int8_t> labels,
                                   ParameterSet<T>& grads, T weight, Mode mode, Rng* rng) const {
    if (labels.size() != seq.length()) throw std::invalid_argument("labels/sequence length mismatch");
    Cache cache;
    const auto out = run(seq, mode, rng, &cache);
    const auto len = static_cast<Eigen::Index>(seq.length());
    T total = T(0);
    Vector<T> dlogits = Vector<T>::Zero(len);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        if (!seq.mask[i]) throw std::invalid_argument("label on a PAD position");
        total += labels[i] ? softplus(-out.logits[i]) : softplus(out.logits[i]);
        dlogits(static_cast<Eigen::Index>(i)) = weight * (out.probabilities[i] - T(labels[i]));
    }

    grads["head.w"].col(0) += cache.z.transpose() * dlogits;
    grads["head.b"](0, 0) += dlogits.sum();
    const Matrix<T> dz = dlogits * params_["head.w"].col(0).transpose();
    Matrix<T> dx = layer_norm_backward<T>(dz, cache.head_norm, params_["head.ln.gamma"],
                                          grads["head.ln.gamma"], grads["head.ln.beta"]);
    const std::span<const std::uint8_t> mask(seq.mask);
    for (std::size_t l = config_.num_layers; l-- > 0;) {
        dx = backward_block(dx, l, cache.layers[l], grads, mask);
    }

    auto gq = grads["emb.question"];
    auto gs = grads["emb.skill"];
    auto gr = grads["emb.response"];
    auto gm = grads["emb.mastery"];
    auto gc = grads["emb.cluster"];
    auto gd = grads["emb.difficulty"];
    for (std::size_t i = 0; i < seq.length(); ++i) {
        const auto row = dx.row(static_cast<Eigen::Index>(i));
        gq.row(seq.question[i]) += row;
        gs.row(seq.skill[i]) += row;
        gr.row(seq.response[i]) += row;
        gm.row(seq.mastery[i]) += row;
        gc.row(seq.cluster[i]) += row;
        gd.row(seq.difficulty[i]) += row;
    }
    return total;
}

template class Network<float>;
template class Network<double>;

template Matrix<float> depthwise_conv<float>(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> depthwise_conv<double>(const Matrix<double>&, const Matrix<double>&);
template AttentionResult<float> monotonic_attention<float>(
    const Matrix<float>&, const Matrix<float>&, const Matrix<float>&, std::span<const std::uint8_t>,
    std::span<const float>, const Matrix<float>&, const Matrix<float>&, std::size_t);
template AttentionResult<double> monotonic_attention<double>(
    const Matrix<double>&, const Matrix<double>&, const Matrix<double>&,
    std::span<const std::uint8_t>, std::span<const double>, const Matrix<double>&,
    const Matrix<double>&, std::size_t);
template Matrix<float> positional_encoding<float>(std::size_t, std::size_t, std::size_t);
template Matrix<double> positional_encoding<double>(std::size_t, std::size_t, std::size_t);

}  // namespace tutorstack::model
