#include "tutorstack/model/parameters.hpp"

#include <cmath>
#include <stdexcept>

#include "tutorstack/util/random.hpp"

namespace tutorstack::model {

void ModelConfig::validate() const {
    if (embed_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0 || max_seq_len == 0 ||
        conv_kernel == 0 || mastery_buckets == 0 || difficulty_levels == 0 || k_clusters == 0) {
        throw std::invalid_argument("model dimensions must be >= 1");
    }
    if (embed_dim % num_heads != 0) {
        throw std::invalid_argument("embed_dim must be divisible by num_heads");
    }
    if (conv_kernel % 2 == 0) throw std::invalid_argument("conv_kernel must be odd");
    if (question_vocab < 2 || skill_vocab < 2) {
        throw std::invalid_argument("vocab sizes must include PAD and UNK");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
}

std::string layer_param(std::size_t layer, const char* name) {
    return "layers." + std::to_string(layer) + "." + name;
}

ParameterLayout::ParameterLayout(const ModelConfig& c) {
    c.validate();
    const std::size_t d = c.embed_dim;
    add("emb.question", c.question_vocab, d);
    add("emb.skill", c.skill_vocab, d);
    add("emb.response", kResponseVocab, d);
    add("emb.mastery", c.mastery_buckets + 1, d);
    add("emb.cluster", c.k_clusters + 1, d);
    add("emb.difficulty", c.difficulty_levels + 1, d);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        add(layer_param(l, "ln1.gamma"), 1, d);
        add(layer_param(l, "ln1.beta"), 1, d);
        add(layer_param(l, "attn.wq"), d, d);
        add(layer_param(l, "attn.bq"), 1, d);
        add(layer_param(l, "attn.wk"), d, d);
        add(layer_param(l, "attn.bk"), 1, d);
        add(layer_param(l, "attn.wv"), d, d);
        add(layer_param(l, "attn.bv"), 1, d);
        add(layer_param(l, "attn.conv_k"), c.conv_kernel, d);
        add(layer_param(l, "attn.conv_v"), c.conv_kernel, d);
        add(layer_param(l, "attn.decay"), 1, c.num_heads);
        add(layer_param(l, "attn.wo"), d, d);
        add(layer_param(l, "attn.bo"), 1, d);
        add(layer_param(l, "ln2.gamma"), 1, d);
        add(layer_param(l, "ln2.beta"), 1, d);
        add(layer_param(l, "ffn.w1"), d, c.ffn_dim);
        add(layer_param(l, "ffn.b1"), 1, c.ffn_dim);
        add(layer_param(l, "ffn.w2"), c.ffn_dim, d);
        add(layer_param(l, "ffn.b2"), 1, d);
    }
    add("head.ln.gamma", 1, d);
    add("head.ln.beta", 1, d);
    add("head.w", d, 1);
    add("head.b", 1, 1);
}

void ParameterLayout::add(std::string name, std::size_t rows, std::size_t cols) {
    index_[name] = entries_.size();
    entries_.push_back({std::move(name), rows, cols, total_});
    total_ += rows * cols;
}

const TensorEntry& ParameterLayout::at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return entries_[it->second];
}

void initialize(ParameterSet<float>& params, const ModelConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    params.set_zero();
    auto xavier = [&](const std::string& name) {
        auto w = params[name];
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        }
    };
    auto embedding = [&](const std::string& name) {
        auto e = params[name];
        for (Eigen::Index r = 1; r < e.rows(); ++r) {
            for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = static_cast<float>(0.02 * rng.normal());
        }
    };
    for (const char* table : {"emb.question", "emb.skill", "emb.response", "emb.mastery",
                              "emb.cluster", "emb.difficulty"}) {
        embedding(table);
    }
    // softplus(x) = 0.1
    const float decay_init = static_cast<float>(std::log(std::expm1(0.1)));
    const auto centre = static_cast<Eigen::Index>(config.conv_kernel / 2);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        params[layer_param(l, "ln1.gamma")].setOnes();
        params[layer_param(l, "ln2.gamma")].setOnes();
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "ffn.w1", "ffn.w2"}) {
            xavier(layer_param(l, w));
        }
        params[layer_param(l, "attn.conv_k")].row(centre).setOnes();
        params[layer_param(l, "attn.conv_v")].row(centre).setOnes();
        auto decay = params[layer_param(l, "attn.decay")];
        for (std::size_t h = config.content_heads(); h < config.num_heads; ++h) {
            decay(0, static_cast<Eigen::Index>(h)) = decay_init;
        }
    }
    params["head.ln.gamma"].setOnes();
    xavier("head.w");
}

}  // namespace tutorstack::model
