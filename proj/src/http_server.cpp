#include <httplib.h>

#include "fh/service.hpp"

namespace fh {
using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

const char* code_for(int status) {
  switch (status) {
    case 404:
      return "not_found";
    case 405:
      return "method_not_allowed";
    case 413:
      return "payload_too_large";
    default:
      return status >= 500 ? "internal" : "bad_request";
  }
}

template <typename Handler>
auto json_post(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      send_error(res, 400, "bad_request", std::string("malformed JSON: ") + e.what());
      return;
    }
    try {
      send_json(res, 200, handler(body));
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

HttpServer::HttpServer(const Service& service) : server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.set_payload_max_length(8 << 20);
  s.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });
  s.Get("/attributes", [](const httplib::Request&, httplib::Response& res) {
    json names = json::array();
    for (auto n : kAttributeNames) names.push_back(std::string(n));
    send_json(res, 200, {{"attributes", names}});
  });
  s.Post("/hallucinate", json_post([&service](const json& b) { return service.handle_hallucinate(b); }));
  s.Post("/classify", json_post([&service](const json& b) { return service.handle_classify(b); }));
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    send_error(res, res.status, code_for(res.status), res.status == 404 ? "no such endpoint" : "request failed");
    return httplib::Server::HandlerResponse::Handled;
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "unhandled error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    send_error(res, 500, "internal", msg);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace fh
