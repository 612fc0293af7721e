#include "tutorstack/model/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "tutorstack/model/network.hpp"
#include "tutorstack/util/random.hpp"

namespace tutorstack::model {

namespace {

struct Problem {
    EncodedSequence seq;
    std::vector<std::int8_t> labels;
};

Problem random_problem(const ModelConfig& c, std::size_t len, Rng& rng) {
    Problem p;
    auto draw = [&](std::size_t table) {
        return static_cast<std::int32_t>(1 + rng.below(table - 1));
    };
    // Position 0 is PAD so masking participates in the check.
    for (std::size_t i = 0; i < len; ++i) {
        const bool pad = i == 0 && len > 1;
        p.seq.question.push_back(pad ? kPad : draw(c.question_vocab));
        p.seq.skill.push_back(pad ? kPad : draw(c.skill_vocab));
        p.seq.response.push_back(pad ? kResponsePad : draw(kResponseVocab));
        p.seq.mastery.push_back(pad ? kPad : draw(c.mastery_buckets + 1));
        p.seq.cluster.push_back(pad ? kPad : draw(c.k_clusters + 1));
        p.seq.difficulty.push_back(pad ? kPad : draw(c.difficulty_levels + 1));
        p.seq.mask.push_back(pad ? 0 : 1);
        p.labels.push_back(pad ? std::int8_t{-1} : static_cast<std::int8_t>(rng.below(2)));
    }
    return p;
}

GradCheckResult compare(const ModelConfig& config, ParameterSet<double>& params,
                        const Problem& problem, double epsilon) {
    const Network<double> net(config, params);
    ParameterSet<double> grads(params.layout());
    GradCheckResult result;
    result.loss = net.accumulate_gradients(problem.seq, problem.labels, grads, 1.0, Mode::kInfer);
    const auto& entries = params.layout().entries();
    auto& values = params.values();
    for (const auto& e : entries) {
        for (std::size_t k = 0; k < e.size(); ++k) {
            const std::size_t i = e.offset + k;
            const double saved = values[i];
            values[i] = saved + epsilon;
            const double up = net.loss(problem.seq, problem.labels);
            values[i] = saved - epsilon;
            const double down = net.loss(problem.seq, problem.labels);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = grads.values()[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            const double rel = std::abs(analytic - numeric) / denom;
            result.max_abs_gradient = std::max(result.max_abs_gradient, std::abs(analytic));
            ++result.parameters_checked;
            if (rel > result.worst_relative_error) {
                result.worst_relative_error = rel;
                result.worst_parameter = e.name;
                result.worst_index = k;
            }
        }
    }
    return result;
}

ParameterSet<double> random_params(const ParameterLayout& layout, const ModelConfig& config,
                                   std::uint64_t seed) {
    ParameterSet<float> init(layout);
    initialize(init, config, seed);
    auto params = init.cast<double>();
    // Perturb everything so no parameter sits at a symmetric point.
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& v : params.values()) v += 0.1 * rng.normal();
    return params;
}

}  // namespace

ModelConfig tiny_config() {
    ModelConfig c;
    c.embed_dim = 8;
    c.num_layers = 1;
    c.num_heads = 1;
    c.ffn_dim = 16;
    c.max_seq_len = 4;
    c.conv_kernel = 3;
    c.dropout = 0.0;
    c.k_clusters = 3;
    c.question_vocab = 6;
    c.skill_vocab = 5;
    return c;
}

GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, double epsilon,
                           std::size_t seq_len) {
    const ParameterLayout layout(config);
    auto params = random_params(layout, config, seed);
    Rng rng(seed);
    const auto problem = random_problem(config, std::min(seq_len, config.max_seq_len), rng);
    return compare(config, params, problem, epsilon);
}

GradCheckResult grad_check_saturated(const ModelConfig& config, std::uint64_t seed,
                                     double epsilon) {
    const ParameterLayout layout(config);
    auto params = random_params(layout, config, seed);
    Rng rng(seed);
    auto problem = random_problem(config, config.max_seq_len, rng);
    for (auto& l : problem.labels) {
        if (l >= 0) l = 1;
    }
    // A large head bias with a tiny readout drives every logit far positive.
    params["head.w"] *= 1e-3;
    params["head.b"](0, 0) = 40.0;
    return compare(config, params, problem, epsilon);
}

}  // namespace tutorstack::model
