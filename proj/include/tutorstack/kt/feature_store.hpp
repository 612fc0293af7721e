#pragma once

#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "tutorstack/kt/ability.hpp"
#include "tutorstack/kt/bkt.hpp"
#include "tutorstack/kt/difficulty.hpp"
#include "tutorstack/kt/interaction.hpp"

namespace tutorstack::kt {

/// Raised when an interaction is not newer than the student's latest one.
class OutOfOrderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SkillMastery {
    std::string student_id;
    std::string skill_id;
    double mastery = 0.0;
    std::size_t observations = 0;
    double unmastered = 1.0;  // 1 - mastery, tracked separately for precision
};

struct AbilityProfile {
    std::string student_id;
    FeatureVector features{0.5, 0.5, 0.5, 0.0};
    std::size_t cluster_id = 0;
};

/// Point-in-time copy of one student's derived state.
struct StudentSnapshot {
    std::string student_id;
    std::vector<Interaction> history;
    std::map<std::string, SkillMastery> skills;
    AbilityProfile profile;
    std::size_t interactions() const { return history.size(); }
};

/// Live per-student latent relations. Readers share a lock; writers are
/// exclusive, so interactions for one student apply in arrival order.
class FeatureStore {
public:
    explicit FeatureStore(BktParams params = {}, std::size_t k_clusters = 5);

    /// Creates an empty student if absent. Returns true when created.
    bool ensure_student(const std::string& student_id);

    /// Applies one interaction and returns the skill's mastery afterwards.
    /// Throws OutOfOrderError when timestamp <= the student's latest.
    double record(const Interaction& interaction);

    bool has_student(const std::string& student_id) const;
    std::optional<StudentSnapshot> snapshot(const std::string& student_id) const;
    std::vector<std::string> students() const;
    DifficultyTable difficulty() const;

    /// Fixed centroids (e.g. from a model checkpoint). Without them, clusters
    /// come from a global k-means over current profiles.
    void set_centroids(std::vector<FeatureVector> centroids);

    const BktParams& params() const { return params_; }

private:
    struct StudentState {
        std::vector<Interaction> history;
        std::map<std::string, SkillMastery> skills;
        FeatureVector profile_features{0.5, 0.5, 0.5, 0.0};
    };

    std::size_t cluster_locked(const FeatureVector& features) const;

    BktParams params_;
    std::size_t k_clusters_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, StudentState> students_;
    DifficultyTable difficulty_;
    std::vector<FeatureVector> centroids_;
};

}  // namespace tutorstack::kt
