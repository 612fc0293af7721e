#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tutorstack/kt/interaction.hpp"

namespace tutorstack::kt {

using FeatureVector = std::vector<double>;

/// Interactions between ability-profile refreshes.
inline constexpr std::size_t kAbilityRefreshInterval = 20;

/// [rate(last 10), rate(last 50), rate(all), min(1, n/200)]. Short histories
/// use what is available; an empty history yields [0.5, 0.5, 0.5, 0].
FeatureVector ability_features(std::span<const Interaction> history);

struct KMeansResult {
    std::vector<FeatureVector> centroids;  // sorted lexicographically
    std::size_t requested_k = 0;
    /// Within-cluster SSE after each Lloyd iteration of the winning restart.
    std::vector<double> sse_trace;
    double sse = 0.0;

    bool reduced() const { return centroids.size() < requested_k; }
};

/// Lloyd's algorithm with k-means++ seeding. Runs `restarts` seeded restarts
/// and keeps the lowest SSE. When there are fewer distinct points than k, k is
/// reduced to the number of distinct points (see KMeansResult::reduced).
KMeansResult kmeans_fit(const std::vector<FeatureVector>& points, std::size_t k,
                        std::uint64_t seed, std::size_t restarts = 20);

/// Index of the nearest centroid; ties go to the lowest index.
std::size_t assign_cluster(const FeatureVector& features,
                           const std::vector<FeatureVector>& centroids);

double squared_distance(const FeatureVector& a, const FeatureVector& b);

/// Sum of squared distances from each point to its nearest centroid.
double within_cluster_sse(const std::vector<FeatureVector>& points,
                          const std::vector<FeatureVector>& centroids);

}  // namespace tutorstack::kt
