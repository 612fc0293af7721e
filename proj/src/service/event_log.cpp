#include "tutorstack/service/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tutorstack::service {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

bool is_event_kind(const std::string& kind) {
    return kind == "interaction" || kind == "ask" || kind == "ingest" || kind == "recommend";
}

nlohmann::json EventRecord::to_json() const {
    return {{"seq", seq}, {"ts", timestamp}, {"kind", kind}, {"payload", payload}};
}

EventRecord EventRecord::from_json(const nlohmann::json& j) {
    EventRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.timestamp = j.at("ts").get<std::int64_t>();
    r.kind = j.at("kind").get<std::string>();
    r.payload = j.at("payload");
    return r;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    if (std::filesystem::exists(path_)) {
        const auto data = read_file(path_);
        const auto last_nl = data.rfind('\n');
        const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (complete != data.size()) std::filesystem::resize_file(path_, complete);
    }
    const auto events = read_all();
    last_seq_ = events.empty() ? 0 : events.back().seq;
}

std::vector<EventRecord> EventLog::read_all() const {
    std::vector<EventRecord> out;
    if (!std::filesystem::exists(path_)) return out;
    std::istringstream in(read_file(path_));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        EventRecord r;
        try {
            r = EventRecord::from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (r.seq != out.size() + 1) {
            throw std::runtime_error(path_.string() + ":" + std::to_string(line_no) +
                                     ": expected sequence " + std::to_string(out.size() + 1) +
                                     ", found " + std::to_string(r.seq));
        }
        if (!is_event_kind(r.kind)) {
            throw std::runtime_error(path_.string() + ":" + std::to_string(line_no) +
                                     ": unknown event kind " + r.kind);
        }
        out.push_back(std::move(r));
    }
    return out;
}

EventRecord EventLog::append(const std::string& kind, nlohmann::json payload, std::int64_t timestamp) {
    if (!is_event_kind(kind)) throw std::invalid_argument("unknown event kind " + kind);
    std::lock_guard lock(mutex_);
    EventRecord r{last_seq_ + 1, timestamp, kind, std::move(payload)};
    const auto line = r.to_json().dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + path_.string() + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) {
            const std::string err = std::strerror(errno);
            // Drop any partial line so the next append starts cleanly.
            const auto size = ::lseek(fd, 0, SEEK_END);
            if (size >= 0 && static_cast<std::size_t>(size) >= written) {
                [[maybe_unused]] const int rc = ::ftruncate(fd, size - static_cast<off_t>(written));
            }
            ::close(fd);
            throw std::runtime_error("append to " + path_.string() + " failed: " + err);
        }
        written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    last_seq_ = r.seq;
    return r;
}

std::uint64_t EventLog::last_seq() const {
    std::lock_guard lock(mutex_);
    return last_seq_;
}

}  // namespace tutorstack::service
