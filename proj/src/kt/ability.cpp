#include "tutorstack/kt/ability.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

#include "tutorstack/util/random.hpp"

namespace tutorstack::kt {

namespace {

double tail_rate(std::span<const Interaction> history, std::size_t window) {
    const std::size_t n = std::min(window, history.size());
    std::size_t hits = 0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) {
        hits += history[i].correct ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

struct LloydRun {
    std::vector<FeatureVector> centroids;
    std::vector<double> trace;
    double sse = std::numeric_limits<double>::infinity();
};

std::vector<FeatureVector> seed_plus_plus(const std::vector<FeatureVector>& points, std::size_t k,
                                          Rng& rng) {
    std::vector<FeatureVector> centroids;
    centroids.push_back(points[rng.below(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

/// Single-point transfers that strictly lower the SSE, accounting for the
/// centroid shift a move causes. Escapes Lloyd fixpoints that are not local
/// optima under one-point moves.
void hartigan_refine(const std::vector<FeatureVector>& points, std::vector<FeatureVector>& centroids,
                     std::vector<double>& trace) {
    const std::size_t k = centroids.size();
    const std::size_t dim = points.front().size();
    std::vector<std::size_t> label(points.size());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        label[i] = assign_cluster(points[i], centroids);
        ++counts[label[i]];
    }
    // Recompute means from the final assignment.
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        FeatureVector mean(dim, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (label[i] != c) continue;
            for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
        }
        for (auto& m : mean) m /= static_cast<double>(counts[c]);
        centroids[c] = std::move(mean);
    }
    bool moved = true;
    for (int pass = 0; moved && pass < 100; ++pass) {
        moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t from = label[i];
            if (counts[from] <= 1) continue;
            const double n_from = static_cast<double>(counts[from]);
            const double removal = n_from / (n_from - 1.0) * squared_distance(points[i], centroids[from]);
            std::size_t best = from;
            double best_gain = 1e-12;
            for (std::size_t to = 0; to < k; ++to) {
                if (to == from) continue;
                const double n_to = static_cast<double>(counts[to]);
                const double added = n_to / (n_to + 1.0) * squared_distance(points[i], centroids[to]);
                if (removal - added > best_gain) {
                    best_gain = removal - added;
                    best = to;
                }
            }
            if (best == from) continue;
            const double n_to = static_cast<double>(counts[best]);
            for (std::size_t d = 0; d < dim; ++d) {
                centroids[from][d] = (centroids[from][d] * n_from - points[i][d]) / (n_from - 1.0);
                centroids[best][d] = (centroids[best][d] * n_to + points[i][d]) / (n_to + 1.0);
            }
            --counts[from];
            ++counts[best];
            label[i] = best;
            moved = true;
        }
        if (moved) trace.push_back(within_cluster_sse(points, centroids));
    }
}

LloydRun lloyd(const std::vector<FeatureVector>& points, std::vector<FeatureVector> centroids) {
    constexpr int kMaxIterations = 100;
    const std::size_t k = centroids.size();
    const std::size_t dim = points.front().size();
    std::vector<std::size_t> assignment(points.size(), k);
    LloydRun run;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = assign_cluster(points[i], centroids);
            if (c != assignment[i]) {
                assignment[i] = c;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<FeatureVector> sums(k, FeatureVector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i][d];
            ++counts[assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            // An emptied cluster keeps its previous centroid.
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) {
                centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
            }
        }
        run.trace.push_back(within_cluster_sse(points, centroids));
    }
    hartigan_refine(points, centroids, run.trace);
    run.sse = within_cluster_sse(points, centroids);
    if (run.trace.empty()) run.trace.push_back(run.sse);
    run.centroids = std::move(centroids);
    return run;
}

}  // namespace

FeatureVector ability_features(std::span<const Interaction> history) {
    if (history.empty()) return {0.5, 0.5, 0.5, 0.0};
    return {tail_rate(history, 10), tail_rate(history, 50), tail_rate(history, history.size()),
            std::min(1.0, static_cast<double>(history.size()) / 200.0)};
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("feature dimension mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

std::size_t assign_cluster(const FeatureVector& features,
                           const std::vector<FeatureVector>& centroids) {
    if (centroids.empty()) throw std::invalid_argument("assign_cluster: no centroids");
    std::size_t best = 0;
    double best_d = squared_distance(features, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(features, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double within_cluster_sse(const std::vector<FeatureVector>& points,
                          const std::vector<FeatureVector>& centroids) {
    double sse = 0.0;
    for (const auto& p : points) sse += squared_distance(p, centroids[assign_cluster(p, centroids)]);
    return sse;
}

KMeansResult kmeans_fit(const std::vector<FeatureVector>& points, std::size_t k,
                        std::uint64_t seed, std::size_t restarts) {
    if (k == 0) throw std::invalid_argument("kmeans_fit: k must be >= 1");
    if (points.size() < k) {
        throw std::invalid_argument("kmeans_fit: need at least k points");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw std::invalid_argument("kmeans_fit: ragged feature vectors");
    }
    const std::set<FeatureVector> distinct(points.begin(), points.end());
    KMeansResult result;
    result.requested_k = k;
    const std::size_t effective_k = std::min(k, distinct.size());

    Rng rng(seed);
    LloydRun best;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
        auto run = lloyd(points, seed_plus_plus(points, effective_k, rng));
        if (run.sse < best.sse) best = std::move(run);
    }
    std::sort(best.centroids.begin(), best.centroids.end());
    result.centroids = std::move(best.centroids);
    result.sse_trace = std::move(best.trace);
    result.sse = best.sse;
    return result;
}

}  // namespace tutorstack::kt
