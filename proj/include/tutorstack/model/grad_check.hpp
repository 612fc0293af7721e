#pragma once

#include <cstdint>
#include <string>

#include "tutorstack/model/config.hpp"

namespace tutorstack::model {

struct GradCheckResult {
    double worst_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t parameters_checked = 0;
    double loss = 0.0;
    double max_abs_gradient = 0.0;
};

/// The 64-bit tiny configuration: d=8, one layer, one head, length 4.
ModelConfig tiny_config();

/// Compares analytic gradients of the masked BCE loss against central finite
/// differences for every parameter of a randomly initialized model in double
/// precision. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, double epsilon = 1e-5,
                           std::size_t seq_len = 4);

/// Same check at a point where every target is predicted almost perfectly
/// (loss ~ 0), so both gradients should vanish.
GradCheckResult grad_check_saturated(const ModelConfig& config, std::uint64_t seed,
                                     double epsilon = 1e-5);

}  // namespace tutorstack::model
