#pragma once

#include <span>
#include <vector>

#include "tutorstack/kt/interaction.hpp"

namespace tutorstack::kt {

/// Standard two-state BKT parameters.
struct BktParams {
    double p_init = 0.3;
    double p_transit = 0.2;
    double p_guess = 0.2;
    double p_slip = 0.1;

    /// Throws std::invalid_argument unless p_init, p_transit in [0,1],
    /// p_guess, p_slip in [0,0.5) and p_guess + p_slip < 1.
    void validate() const;

    friend bool operator==(const BktParams&, const BktParams&) = default;
};

/// Probability of a correct answer given the current mastery estimate.
double p_correct(double mastery, const BktParams& params);

/// Mastery together with its complement. Near certainty `1 - mastery` is lost
/// to rounding, and a run of wrong answers would then amplify that error, so
/// chained updates carry both.
struct BktBelief {
    double known = 0.0;
    double unknown = 1.0;

    static BktBelief from_mastery(double mastery) { return {mastery, 1.0 - mastery}; }
    double mastery() const { return known; }
};

/// One observation: Bayes posterior, then the learning transition.
BktBelief bkt_step(const BktBelief& belief, bool correct, const BktParams& params);

/// Bayes posterior of `prior` after observing `correct`, followed by the
/// learning transition. Rejects non-finite or out-of-range priors.
double bkt_update(double prior, bool correct, const BktParams& params);

/// Mastery estimate before each observation of a single student-skill log.
/// Element 0 is p_init; the result has one entry per interaction.
std::vector<double> mastery_sequence(std::span<const Interaction> log, const BktParams& params);

/// Mastery after the whole log has been observed.
double final_mastery(std::span<const Interaction> log, const BktParams& params);

/// Grid search (step 0.05) over all four parameters minimizing the predictive
/// log-loss of the given student-skill logs.
BktParams fit_bkt_params(const std::vector<std::vector<Interaction>>& skill_logs);

}  // namespace tutorstack::kt
