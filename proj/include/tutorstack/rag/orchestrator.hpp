#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tutorstack/kb/knowledge_base.hpp"
#include "tutorstack/kt/feature_store.hpp"
#include "tutorstack/model/kt_model.hpp"
#include "tutorstack/rag/backend.hpp"
#include "tutorstack/rag/learner_state.hpp"
#include "tutorstack/rag/prompt.hpp"
#include "tutorstack/rag/skill_catalog.hpp"

namespace tutorstack::rag {

/// Neither the backend nor retrieval can produce an answer.
class LlmUnavailableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kRetrievalOnlyNotice =
    "Retrieval-only answer (the language model is unavailable). Most relevant course material:";

struct Citation {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string title;
    std::string source_url;
    double score = 0.0;

    std::string tag() const;
};

struct AskResult {
    std::string answer;
    std::vector<Citation> citations;
    LearnerStateSummary summary;
    bool degraded = false;
    std::string backend;

    nlohmann::json to_json() const;
};

struct Recommendation {
    std::size_t rank = 0;
    std::string skill_id;
    std::string skill_name;
    double mastery = 0.0;
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string title;
    double score = 0.0;
    std::string rationale;
};

struct RecommendationList {
    std::vector<Recommendation> items;
    bool all_skills_strong = false;

    nlohmann::json to_json() const;
};

struct OrchestratorOptions {
    double weak_threshold = kWeakThreshold;
    std::size_t budget = kDefaultBudget;
};

using ModelProvider = std::function<std::shared_ptr<const model::KtModel>()>;

/// Stateless between calls: every request reads the current feature-store,
/// knowledge-base and model snapshots.
class Orchestrator {
public:
    Orchestrator(const kb::KnowledgeBase& kb, const kt::FeatureStore& store, SkillCatalog catalog,
                 std::shared_ptr<LlmBackend> backend, ModelProvider model = {},
                 OrchestratorOptions options = {});

    LearnerStateSummary summarize_state(const std::string& student_id,
                                        const std::optional<Candidate>& candidate = std::nullopt) const;

    /// summarize -> search -> assemble -> complete. Backend failures degrade to
    /// the top retrieved chunk; with nothing retrieved they raise
    /// LlmUnavailableError.
    AskResult ask(const std::string& student_id, const std::string& question, std::size_t top_k = 5,
                  const std::optional<Candidate>& candidate = std::nullopt) const;

    /// Score (1 - mastery) * bm25(skill query, chunk) over every weak skill and
    /// chunk; each chunk appears once, under its best skill.
    RecommendationList recommend(const std::string& student_id, std::size_t rec_k = 3) const;

    const SkillCatalog& catalog() const { return catalog_; }
    const LlmBackend& backend() const { return *backend_; }

private:
    const kb::KnowledgeBase& kb_;
    const kt::FeatureStore& store_;
    SkillCatalog catalog_;
    std::shared_ptr<LlmBackend> backend_;
    ModelProvider model_;
    OrchestratorOptions options_;
};

/// Ranks (weak skill, chunk) pairs in a fixed snapshot; exposed for testing.
RecommendationList rank_recommendations(const LearnerStateSummary& summary, const SkillCatalog& catalog,
                                        const kb::KbSnapshot& snapshot, std::size_t rec_k);

}  // namespace tutorstack::rag
