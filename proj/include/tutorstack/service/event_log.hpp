#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace tutorstack::service {

struct EventRecord {
    std::uint64_t seq = 0;
    std::int64_t timestamp = 0;  // ms since epoch, from the service clock
    std::string kind;            // interaction | ask | ingest | recommend
    nlohmann::json payload;

    nlohmann::json to_json() const;
    static EventRecord from_json(const nlohmann::json& j);
};

/// Append-only JSONL log with gapless sequence numbers starting at 1. Each
/// append is one write followed by fsync; a torn final line left by a crash
/// is removed when the log is opened.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path);

    /// Throws std::runtime_error on a gap, a malformed line or a bad kind.
    std::vector<EventRecord> read_all() const;

    EventRecord append(const std::string& kind, nlohmann::json payload, std::int64_t timestamp);

    std::uint64_t last_seq() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::uint64_t last_seq_ = 0;
};

bool is_event_kind(const std::string& kind);

}  // namespace tutorstack::service
