#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tutorstack/kb/knowledge_base.hpp"
#include "tutorstack/kt/feature_store.hpp"
#include "tutorstack/model/kt_model.hpp"
#include "tutorstack/rag/orchestrator.hpp"
#include "tutorstack/service/event_log.hpp"

namespace tutorstack::service {

/// An error with its HTTP status and machine-readable code.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }
    nlohmann::json body() const { return {{"code", code_}, {"message", what()}}; }

private:
    int status_;
    std::string code_;
};

inline constexpr const char* kEventsFile = "events.jsonl";
inline constexpr const char* kSkillsFile = "skills.csv";

struct ServiceConfig {
    std::filesystem::path data_dir;
    std::shared_ptr<rag::LlmBackend> backend;  // defaults to the mock backend
    kb::Fetcher fetcher;                       // defaults to HTTP fetch
    kb::Clock clock = kb::system_clock_ms;
    rag::OrchestratorOptions options;
};

/// The service's operations, independent of the transport. Request and
/// response bodies are JSON; failures throw ApiError.
///
/// Data directory: events.jsonl, kb/, model.manifest.json + model.weights.bin
/// (optional checkpoint), skills.csv (optional catalog). Opening replays the
/// event log into a fresh feature store.
class TutorService {
public:
    explicit TutorService(ServiceConfig config);

    nlohmann::json ingest(const nlohmann::json& body);
    nlohmann::json record_interaction(const std::string& student_id, const nlohmann::json& body);
    nlohmann::json ask(const std::string& student_id, const nlohmann::json& body);
    nlohmann::json state(const std::string& student_id) const;
    nlohmann::json recommendations(const std::string& student_id, std::size_t k);
    nlohmann::json health() const;
    /// Reloads the checkpoint and skill catalog from the data directory.
    nlohmann::json reload();

    std::uint64_t last_event_seq() const { return log_.last_seq(); }
    const kt::FeatureStore& store() const { return store_; }
    const kb::KnowledgeBase& knowledge_base() const { return kb_; }

private:
    struct Loaded {
        std::shared_ptr<const model::KtModel> model;
        std::shared_ptr<const rag::Orchestrator> orchestrator;
    };

    void replay();
    void apply_interaction(const kt::Interaction& interaction);
    Loaded load_components() const;
    Loaded current() const;
    std::optional<rag::Candidate> candidate_from(const nlohmann::json& body) const;

    ServiceConfig config_;
    kb::KnowledgeBase kb_;
    kt::FeatureStore store_;
    EventLog log_;

    // Serializes state-changing requests so log order equals apply order.
    std::mutex write_mutex_;
    mutable std::mutex question_mutex_;
    std::map<std::string, std::string> question_skill_;
    std::map<std::string, std::int64_t> latest_timestamp_;

    mutable std::mutex loaded_mutex_;
    Loaded loaded_;
};

}  // namespace tutorstack::service
