#include "tutorstack/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tutorstack::sim {

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Rank-sum with midranks for ties.
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]]) {
                positive_rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw UndefinedAucError("auc is undefined without both positive and negative labels");
    }
    const double p = static_cast<double>(positives);
    const double n = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double log_loss(const std::vector<double>& probabilities, const std::vector<bool>& labels) {
    if (probabilities.size() != labels.size() || probabilities.empty()) {
        throw std::invalid_argument("log_loss: size mismatch or empty input");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-7, 1.0 - 1e-7);
        total -= labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return total / static_cast<double>(probabilities.size());
}

double accuracy(const std::vector<double>& probabilities, const std::vector<bool>& labels) {
    if (probabilities.size() != labels.size() || probabilities.empty()) {
        throw std::invalid_argument("accuracy: size mismatch or empty input");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        hits += ((probabilities[i] >= 0.5) == labels[i]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(probabilities.size());
}

}  // namespace tutorstack::sim
