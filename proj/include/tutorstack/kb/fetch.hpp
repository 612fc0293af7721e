#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace tutorstack::kb {

enum class FetchErrorKind {
    bad_url,
    scheme_rejected,
    not_found,
    http_status,
    timeout,
    too_large,
    too_many_redirects,
    network,
};

const char* to_string(FetchErrorKind kind);

class FetchError : public std::runtime_error {
public:
    FetchError(FetchErrorKind kind, const std::string& message, int status = 0)
        : std::runtime_error(message), kind_(kind), status_(status) {}

    FetchErrorKind kind() const { return kind_; }
    /// HTTP status for not_found / http_status, otherwise 0.
    int status() const { return status_; }

private:
    FetchErrorKind kind_;
    int status_;
};

struct FetchOptions {
    std::chrono::milliseconds timeout{10'000};
    int max_redirects = 3;
    std::size_t max_bytes = 5u << 20;
};

struct FetchResult {
    std::string body;
    std::string final_url;
    std::string content_type;
};

struct Url {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string target;  // path plus query, always starting with '/'

    std::string origin() const;
    std::string str() const;
};

/// Parses an absolute http(s) URL. The fragment is dropped.
/// Throws FetchError(bad_url) or FetchError(scheme_rejected).
Url parse_url(const std::string& url);

/// Resolves a redirect Location against the URL that produced it.
std::string resolve_location(const Url& base, const std::string& location);

/// GET with manual redirect handling. Only a final 200 succeeds.
FetchResult fetch(const std::string& url, const FetchOptions& options = {});

using Fetcher = std::function<FetchResult(const std::string& url)>;

}  // namespace tutorstack::kb
