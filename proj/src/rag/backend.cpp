#include "tutorstack/rag/backend.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "tutorstack/kb/fetch.hpp"
#include "tutorstack/kb/text.hpp"

namespace tutorstack::rag {

namespace {

std::counting_semaphore<kMaxRemoteInFlight>& in_flight() {
    static std::counting_semaphore<kMaxRemoteInFlight> sem(kMaxRemoteInFlight);
    return sem;
}

struct SlotGuard {
    SlotGuard() { in_flight().acquire(); }
    ~SlotGuard() { in_flight().release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;
};

bool transient(LlmErrorKind kind) {
    return kind == LlmErrorKind::timeout || kind == LlmErrorKind::network ||
           kind == LlmErrorKind::http;
}

}  // namespace

const char* to_string(LlmErrorKind kind) {
    switch (kind) {
        case LlmErrorKind::auth: return "auth";
        case LlmErrorKind::timeout: return "timeout";
        case LlmErrorKind::malformed: return "malformed";
        case LlmErrorKind::http: return "http";
        case LlmErrorKind::network: return "network";
        case LlmErrorKind::config: return "config";
    }
    return "unknown";
}

std::string MockBackend::complete(const PromptBundle& bundle) {
    std::string out = "Mock tutor answer to: " + bundle.question + "\n";
    out += "Learner summary digest: " + kb::fnv1a_hex(bundle.summary) + "\n";
    out += "Sources:";
    if (bundle.blocks.empty()) out += " none";
    for (const auto& b : bundle.blocks) out += " " + b.tag();
    out += "\n";
    return out;
}

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig c;
    const char* url = std::getenv("TUTORSTACK_LLM_URL");
    const char* key = std::getenv("TUTORSTACK_LLM_KEY");
    const char* model = std::getenv("TUTORSTACK_LLM_MODEL");
    if (!url || !*url) throw LlmError(LlmErrorKind::config, "TUTORSTACK_LLM_URL is not set");
    if (!key || !*key) throw LlmError(LlmErrorKind::config, "TUTORSTACK_LLM_KEY is not set");
    c.url = url;
    c.key = key;
    if (model && *model) c.model = model;
    return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.attempts < 1) throw std::invalid_argument("remote backend needs at least one attempt");
    try {
        const auto u = kb::parse_url(config_.url);
        origin_ = u.origin();
        target_ = u.target;
    } catch (const kb::FetchError& e) {
        throw LlmError(LlmErrorKind::config, std::string("bad LLM endpoint: ") + e.what());
    }
}

std::string RemoteBackend::complete(const PromptBundle& bundle) {
    const nlohmann::json request = {
        {"model", config_.model},
        {"max_tokens", config_.max_tokens},
        {"messages", {{{"role", "system"}, {"content", bundle.system}},
                      {{"role", "user"}, {"content", bundle.render_user()}}}}};
    const auto body = request.dump();
    for (int i = 1;; ++i) {
        try {
            return attempt(body);
        } catch (const LlmError& e) {
            if (i >= config_.attempts || !transient(e.kind())) throw;
        }
    }
}

std::string RemoteBackend::attempt(const std::string& body) {
    SlotGuard slot;
    httplib::Client client(origin_);
    const auto ms = config_.timeout.count();
    client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_bearer_token_auth(config_.key);
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(target_, body, "application/json");
    if (!res) {
        const auto err = res.error();
        const auto elapsed = std::chrono::steady_clock::now() - started;
        if (err == httplib::Error::ConnectionTimeout ||
            ((err == httplib::Error::Read || err == httplib::Error::Write) &&
             elapsed >= config_.timeout * 9 / 10)) {
            throw LlmError(LlmErrorKind::timeout, "LLM request timed out");
        }
        throw LlmError(LlmErrorKind::network, "LLM request failed: " + httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403) {
        throw LlmError(LlmErrorKind::auth, "LLM endpoint rejected credentials (HTTP " +
                                               std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
        throw LlmError(LlmErrorKind::http, "LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw LlmError(LlmErrorKind::malformed,
                       "LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw LlmError(LlmErrorKind::malformed, std::string("unexpected LLM response: ") + e.what());
    }
}

}  // namespace tutorstack::rag
