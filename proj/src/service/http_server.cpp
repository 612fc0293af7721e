#include "tutorstack/service/http_server.hpp"

#include <charconv>
#include <cstdlib>

#include "httplib.h"

namespace tutorstack::service {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.status(), e.body()); }

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) throw ApiError(400, "malformed_json", "request body is empty");
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ApiError(400, "malformed_json", std::string("request body is not valid JSON: ") + e.what());
    }
}

std::size_t parse_k(const httplib::Request& req) {
    if (!req.has_param("k")) return 3;
    const auto v = req.get_param_value("k");
    std::size_t k = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
    if (ec != std::errc() || p != v.data() + v.size() || k > 100) {
        throw ApiError(400, "bad_request", "query parameter k must be an integer between 0 and 100");
    }
    return k;
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const ApiError& e) {
            send_error(res, e);
        } catch (const json::exception& e) {
            send_error(res, ApiError(400, "bad_request", e.what()));
        } catch (const std::exception& e) {
            send_error(res, ApiError(500, "internal", e.what()));
        }
    };
}

}  // namespace

std::optional<std::string> token_from_env() {
    const char* t = std::getenv("TUTORSTACK_TOKEN");
    if (!t || !*t) return std::nullopt;
    return std::string(t);
}

HttpServer::HttpServer(TutorService& service, HttpOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    const auto threads = options_.threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                           {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

    s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (!options_.token || req.method == "OPTIONS" || req.path == "/v1/health") {
            return httplib::Server::HandlerResponse::Unhandled;
        }
        if (req.get_header_value("Authorization") != "Bearer " + *options_.token) {
            send_error(res, ApiError(401, "unauthorized", "missing or invalid bearer token"));
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
              send_json(res, 200, service_.health());
          }));
    s.Post("/v1/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service_.ingest(parse_body(req)));
           }));
    s.Post(R"(/v1/students/([^/]+)/interactions)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service_.record_interaction(req.matches[1], parse_body(req)));
           }));
    s.Post(R"(/v1/students/([^/]+)/ask)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service_.ask(req.matches[1], parse_body(req)));
           }));
    s.Get(R"(/v1/students/([^/]+)/state)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, service_.state(req.matches[1]));
          }));
    s.Get(R"(/v1/students/([^/]+)/recommendations)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, service_.recommendations(req.matches[1], parse_k(req)));
          }));
    s.Post("/v1/admin/reload", guarded([this](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, service_.reload());
           }));

    // Unmatched routes and httplib's own errors still answer in JSON.
    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
        send_json(res, res.status, {{"code", code}, {"message", req.method + " " + req.path}});
        return httplib::Server::HandlerResponse::Handled;
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        send_json(res, 500, {{"code", "internal"}, {"message", "unhandled server error"}});
    });
}

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace tutorstack::service
