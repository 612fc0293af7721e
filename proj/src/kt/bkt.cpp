#include "tutorstack/kt/bkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tutorstack::kt {

namespace {

bool in_unit(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void BktParams::validate() const {
    if (!in_unit(p_init) || !in_unit(p_transit)) {
        throw std::invalid_argument("p_init and p_transit must lie in [0,1]");
    }
    if (!in_unit(p_guess) || p_guess >= 0.5 || !in_unit(p_slip) || p_slip >= 0.5) {
        throw std::invalid_argument("p_guess and p_slip must lie in [0,0.5)");
    }
    if (p_guess + p_slip >= 1.0) {
        throw std::invalid_argument("p_guess + p_slip must be < 1");
    }
}

double p_correct(double mastery, const BktParams& params) {
    return mastery * (1.0 - params.p_slip) + (1.0 - mastery) * params.p_guess;
}

BktBelief bkt_step(const BktBelief& belief, bool correct, const BktParams& params) {
    if (!in_unit(belief.known) || !in_unit(belief.unknown)) {
        throw std::invalid_argument("bkt prior must be a finite probability, got " +
                                    std::to_string(belief.known));
    }
    const double known = belief.known * (correct ? 1.0 - params.p_slip : params.p_slip);
    const double unknown = belief.unknown * (correct ? params.p_guess : 1.0 - params.p_guess);
    const double evidence = known + unknown;
    // Zero evidence only happens for impossible observations (e.g. guess=0 and
    // an unmastered correct answer); keep the prior in that case.
    const double post_known = evidence > 0.0 ? known / evidence : belief.known;
    const double post_unknown = evidence > 0.0 ? unknown / evidence : belief.unknown;
    return {std::min(post_known + post_unknown * params.p_transit, 1.0),
            post_unknown * (1.0 - params.p_transit)};
}

double bkt_update(double prior, bool correct, const BktParams& params) {
    return bkt_step(BktBelief::from_mastery(prior), correct, params).mastery();
}

std::vector<double> mastery_sequence(std::span<const Interaction> log, const BktParams& params) {
    std::vector<double> out;
    out.reserve(log.size());
    auto belief = BktBelief::from_mastery(params.p_init);
    for (const auto& it : log) {
        out.push_back(belief.mastery());
        belief = bkt_step(belief, it.correct, params);
    }
    return out;
}

double final_mastery(std::span<const Interaction> log, const BktParams& params) {
    auto belief = BktBelief::from_mastery(params.p_init);
    for (const auto& it : log) belief = bkt_step(belief, it.correct, params);
    return belief.mastery();
}

BktParams fit_bkt_params(const std::vector<std::vector<Interaction>>& skill_logs) {
    constexpr double kStep = 0.05;
    constexpr double kEps = 1e-6;
    BktParams best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 20; ++a) {
        for (int t = 0; t <= 20; ++t) {
            for (int g = 0; g < 10; ++g) {
                for (int s = 0; s < 10; ++s) {
                    const BktParams p{a * kStep, t * kStep, g * kStep, s * kStep};
                    double loss = 0.0;
                    for (const auto& log : skill_logs) {
                        double mastery = p.p_init;
                        for (const auto& it : log) {
                            const double pc = std::clamp(p_correct(mastery, p), kEps, 1.0 - kEps);
                            loss -= it.correct ? std::log(pc) : std::log(1.0 - pc);
                            mastery = bkt_update(mastery, it.correct, p);
                        }
                        if (loss >= best_loss) break;
                    }
                    if (loss < best_loss) {
                        best_loss = loss;
                        best = p;
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace tutorstack::kt
