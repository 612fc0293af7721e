#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>

#include "tutorstack/rag/prompt.hpp"

namespace tutorstack::rag {

enum class LlmErrorKind { auth, timeout, malformed, http, network, config };

const char* to_string(LlmErrorKind kind);

class LlmError : public std::runtime_error {
public:
    LlmError(LlmErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    LlmErrorKind kind() const { return kind_; }

private:
    LlmErrorKind kind_;
};

struct BackendInfo {
    std::string name;
    std::size_t max_tokens = 0;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual BackendInfo info() const = 0;
    /// Returns the answer text or throws LlmError.
    virtual std::string complete(const PromptBundle& bundle) = 0;
};

/// Pure echo-with-structure backend: restates the question, a digest of the
/// learner summary and every chunk tag in the prompt.
class MockBackend : public LlmBackend {
public:
    BackendInfo info() const override { return {"mock", 0}; }
    std::string complete(const PromptBundle& bundle) override;
};

struct RemoteConfig {
    std::string url;  // full chat-completions endpoint
    std::string key;
    std::string model = "gpt-4";
    std::chrono::milliseconds timeout{30'000};
    int attempts = 2;  // first try plus one retry on transient failures
    std::size_t max_tokens = 1024;

    /// TUTORSTACK_LLM_URL, TUTORSTACK_LLM_KEY, TUTORSTACK_LLM_MODEL.
    /// Throws LlmError(config) when the URL or key is missing.
    static RemoteConfig from_env();
};

/// Chat-completions client. At most four requests are in flight per process.
class RemoteBackend : public LlmBackend {
public:
    explicit RemoteBackend(RemoteConfig config);
    BackendInfo info() const override { return {"remote:" + config_.model, config_.max_tokens}; }
    std::string complete(const PromptBundle& bundle) override;

private:
    std::string attempt(const std::string& body);

    RemoteConfig config_;
    std::string origin_;
    std::string target_;
};

inline constexpr std::ptrdiff_t kMaxRemoteInFlight = 4;

}  // namespace tutorstack::rag
