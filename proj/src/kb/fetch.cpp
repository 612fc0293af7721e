#include "tutorstack/kb/fetch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "httplib.h"

namespace tutorstack::kb {

const char* to_string(FetchErrorKind kind) {
    switch (kind) {
        case FetchErrorKind::bad_url: return "bad_url";
        case FetchErrorKind::scheme_rejected: return "scheme_rejected";
        case FetchErrorKind::not_found: return "not_found";
        case FetchErrorKind::http_status: return "http_status";
        case FetchErrorKind::timeout: return "timeout";
        case FetchErrorKind::too_large: return "too_large";
        case FetchErrorKind::too_many_redirects: return "too_many_redirects";
        case FetchErrorKind::network: return "network";
    }
    return "unknown";
}

std::string Url::origin() const {
    const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return scheme + "://" + host + (default_port ? "" : ":" + std::to_string(port));
}

std::string Url::str() const { return origin() + target; }

Url parse_url(const std::string& url) {
    const auto sep = url.find("://");
    if (sep == std::string::npos || sep == 0) {
        throw FetchError(FetchErrorKind::bad_url, "not an absolute URL: " + url);
    }
    Url out;
    out.scheme = url.substr(0, sep);
    std::transform(out.scheme.begin(), out.scheme.end(), out.scheme.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (out.scheme != "http" && out.scheme != "https") {
        throw FetchError(FetchErrorKind::scheme_rejected, "unsupported scheme: " + out.scheme);
    }
    auto rest = url.substr(sep + 3);
    if (const auto hash = rest.find('#'); hash != std::string::npos) rest.resize(hash);
    const auto slash = rest.find_first_of("/?");
    auto authority = rest.substr(0, slash);
    out.target = slash == std::string::npos ? "/" : rest.substr(slash);
    if (out.target.front() == '?') out.target.insert(out.target.begin(), '/');
    if (const auto at = authority.rfind('@'); at != std::string::npos) authority.erase(0, at + 1);
    out.port = out.scheme == "https" ? 443 : 80;
    const auto bracket = authority.find(']');
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos && (bracket == std::string::npos || colon > bracket)) {
        const auto port_str = authority.substr(colon + 1);
        int port = 0;
        const auto [p, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
        if (ec != std::errc() || p != port_str.data() + port_str.size() || port <= 0 || port > 65535) {
            throw FetchError(FetchErrorKind::bad_url, "bad port in URL: " + url);
        }
        out.port = port;
        authority.resize(colon);
    }
    if (authority.empty()) throw FetchError(FetchErrorKind::bad_url, "missing host: " + url);
    out.host = authority;
    return out;
}

std::string resolve_location(const Url& base, const std::string& location) {
    if (location.find("://") != std::string::npos) return location;
    if (location.rfind("//", 0) == 0) return base.scheme + ":" + location;
    if (!location.empty() && location.front() == '/') return base.origin() + location;
    auto dir = base.target.substr(0, base.target.find('?'));
    dir.resize(dir.rfind('/') + 1);
    return base.origin() + dir + location;
}

FetchResult fetch(const std::string& url, const FetchOptions& options) {
    std::string current = url;
    for (int hop = 0;; ++hop) {
        const Url u = parse_url(current);
        httplib::Client client(u.origin());
        const auto secs = options.timeout.count() / 1000;
        const auto usecs = (options.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        client.set_follow_location(false);

        std::string body;
        bool over_cap = false;
        const auto started = std::chrono::steady_clock::now();
        auto result = client.Get(
            u.target,
            [&](const httplib::Response& response) {
                if (response.has_header("Content-Length")) {
                    const auto len = std::strtoull(response.get_header_value("Content-Length").c_str(),
                                                   nullptr, 10);
                    if (len > options.max_bytes) {
                        over_cap = true;
                        return false;
                    }
                }
                return true;
            },
            [&](const char* data, std::size_t n) {
                if (body.size() + n > options.max_bytes) {
                    over_cap = true;
                    return false;
                }
                body.append(data, n);
                return true;
            });
        if (over_cap) {
            throw FetchError(FetchErrorKind::too_large,
                             current + ": body exceeds " + std::to_string(options.max_bytes) + " bytes");
        }
        if (!result) {
            const auto err = result.error();
            const auto elapsed = std::chrono::steady_clock::now() - started;
            if (err == httplib::Error::ConnectionTimeout ||
                ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                 elapsed >= options.timeout * 9 / 10)) {
                throw FetchError(FetchErrorKind::timeout, current + ": timed out");
            }
            throw FetchError(FetchErrorKind::network, current + ": " + httplib::to_string(err));
        }
        const int status = result->status;
        if (status >= 300 && status < 400 && result->has_header("Location")) {
            if (hop >= options.max_redirects) {
                throw FetchError(FetchErrorKind::too_many_redirects,
                                 url + ": more than " + std::to_string(options.max_redirects) +
                                     " redirects",
                                 status);
            }
            current = resolve_location(u, result->get_header_value("Location"));
            continue;
        }
        if (status == 404 || status == 410) {
            throw FetchError(FetchErrorKind::not_found, current + ": HTTP " + std::to_string(status),
                             status);
        }
        if (status != 200) {
            throw FetchError(FetchErrorKind::http_status,
                             current + ": HTTP " + std::to_string(status), status);
        }
        return {std::move(body), current, result->get_header_value("Content-Type")};
    }
}

}  // namespace tutorstack::kb
