#pragma once

#include <stdexcept>
#include <vector>

namespace tutorstack::sim {

class UndefinedAucError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Area under the ROC curve in the Mann-Whitney form; tied scores count 0.5.
/// Throws UndefinedAucError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7].
double log_loss(const std::vector<double>& probabilities, const std::vector<bool>& labels);

/// Fraction of predictions on the right side of 0.5.
double accuracy(const std::vector<double>& probabilities, const std::vector<bool>& labels);

}  // namespace tutorstack::sim
