#include "tutorstack/kt/feature_store.hpp"

#include <mutex>

namespace tutorstack::kt {

FeatureStore::FeatureStore(BktParams params, std::size_t k_clusters)
    : params_(params), k_clusters_(k_clusters) {
    params_.validate();
}

bool FeatureStore::ensure_student(const std::string& student_id) {
    if (student_id.empty()) throw std::invalid_argument("student id must be non-empty");
    std::unique_lock lock(mutex_);
    return students_.try_emplace(student_id).second;
}

double FeatureStore::record(const Interaction& interaction) {
    validate(interaction);
    std::unique_lock lock(mutex_);
    auto& state = students_[interaction.student_id];
    if (!state.history.empty() && interaction.timestamp <= state.history.back().timestamp) {
        throw OutOfOrderError("timestamp " + std::to_string(interaction.timestamp) +
                              " is not after the latest interaction at " +
                              std::to_string(state.history.back().timestamp));
    }
    state.history.push_back(interaction);
    auto [it, inserted] = state.skills.try_emplace(interaction.skill_id);
    auto& skill = it->second;
    if (inserted) {
        skill.student_id = interaction.student_id;
        skill.skill_id = interaction.skill_id;
        skill.mastery = params_.p_init;
        skill.unmastered = 1.0 - params_.p_init;
    }
    const auto next = bkt_step({skill.mastery, skill.unmastered}, interaction.correct, params_);
    skill.mastery = next.known;
    skill.unmastered = next.unknown;
    ++skill.observations;
    difficulty_.observe(interaction);
    if (state.history.size() % kAbilityRefreshInterval == 0) {
        state.profile_features = ability_features(state.history);
    }
    return skill.mastery;
}

bool FeatureStore::has_student(const std::string& student_id) const {
    std::shared_lock lock(mutex_);
    return students_.contains(student_id);
}

std::optional<StudentSnapshot> FeatureStore::snapshot(const std::string& student_id) const {
    std::shared_lock lock(mutex_);
    const auto it = students_.find(student_id);
    if (it == students_.end()) return std::nullopt;
    StudentSnapshot snap;
    snap.student_id = student_id;
    snap.history = it->second.history;
    snap.skills = it->second.skills;
    snap.profile.student_id = student_id;
    snap.profile.features = it->second.profile_features;
    snap.profile.cluster_id = cluster_locked(it->second.profile_features);
    return snap;
}

std::vector<std::string> FeatureStore::students() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> ids;
    ids.reserve(students_.size());
    for (const auto& [id, state] : students_) ids.push_back(id);
    return ids;
}

DifficultyTable FeatureStore::difficulty() const {
    std::shared_lock lock(mutex_);
    return difficulty_;
}

void FeatureStore::set_centroids(std::vector<FeatureVector> centroids) {
    std::unique_lock lock(mutex_);
    centroids_ = std::move(centroids);
}

std::size_t FeatureStore::cluster_locked(const FeatureVector& features) const {
    if (!centroids_.empty()) return assign_cluster(features, centroids_);
    std::vector<FeatureVector> points;
    points.reserve(students_.size());
    for (const auto& [id, state] : students_) points.push_back(state.profile_features);
    if (points.empty()) return 0;
    const auto fit = kmeans_fit(points, std::min(k_clusters_, points.size()), 0);
    return assign_cluster(features, fit.centroids);
}

}  // namespace tutorstack::kt
