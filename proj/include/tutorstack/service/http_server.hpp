#pragma once

#include <memory>
#include <optional>
#include <string>

#include "tutorstack/service/tutor_service.hpp"

namespace httplib {
class Server;
}

namespace tutorstack::service {

struct HttpOptions {
    /// Required as `Authorization: Bearer <token>` on every route except
    /// /v1/health and CORS preflights when set.
    std::optional<std::string> token;
    std::string cors_origin = "*";
    std::size_t threads = 8;
};

/// REST front end. Every response body is JSON; errors are {code, message}.
class HttpServer {
public:
    HttpServer(TutorService& service, HttpOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();
    void wait_until_ready() const;

private:
    void install_routes();

    TutorService& service_;
    HttpOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

/// Reads TUTORSTACK_TOKEN; empty or unset means no auth.
std::optional<std::string> token_from_env();

}  // namespace tutorstack::service
