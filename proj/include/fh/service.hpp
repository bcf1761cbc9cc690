#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fh/model.hpp"

namespace httplib {
class Server;
}

namespace fh {

/// Request-level failure carrying an HTTP status and a machine-readable code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  [[nodiscard]] int status() const { return status_; }
  [[nodiscard]] const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct HallucinationRequest {
  Image lr;
  std::optional<AttributeVector> attributes;
  bool return_stages = false;
  bool return_attribute_predictions = false;
};

struct HallucinationResponse {
  /// Resolution -> image clamped to [0,1]; 128 is always present.
  std::map<int, Image> outputs;
  AttributeVector used_attributes;
  AttributeVector classifier_attributes;
  /// Stage -> attribute-head probabilities of that stage's critic.
  std::optional<std::map<int, AttributeVector>> critic_attribute_predictions;
  /// Edits applied by manipulate(), in schema order.
  std::vector<std::pair<std::string, double>> edits;
  std::optional<AttributeVector> base_attributes;

  [[nodiscard]] nlohmann::json to_json() const;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Accepts an optional `data:...;base64,` prefix; throws std::invalid_argument on bad input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Stateless hallucination front end over an immutable stage-3 model.
class Service {
 public:
  /// Refuses checkpoints that have not reached stage 3.
  static std::unique_ptr<Service> load(const std::filesystem::path& checkpoint);
  explicit Service(std::unique_ptr<Model> model);

  [[nodiscard]] AttributeVector classify(const Image& lr) const;
  [[nodiscard]] HallucinationResponse hallucinate(const HallucinationRequest& req) const;
  /// hallucinate() with `base` (or the classifier output when absent) edited by name.
  [[nodiscard]] HallucinationResponse manipulate(const Image& lr, const std::optional<AttributeVector>& base,
                                                 const std::map<std::string, double>& edits,
                                                 bool return_stages = false,
                                                 bool return_attribute_predictions = false) const;

  /// JSON entry points used by the HTTP layer; errors surface as ServiceError.
  [[nodiscard]] nlohmann::json handle_hallucinate(const nlohmann::json& body) const;
  [[nodiscard]] nlohmann::json handle_classify(const nlohmann::json& body) const;

  [[nodiscard]] const Model& model() const { return *model_; }

 private:
  std::unique_ptr<Model> model_;
};

/// HTTP binding: GET /health, GET /attributes, POST /hallucinate, POST /classify.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to an ephemeral port and returns it.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Serves until stop(); call after a successful bind.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fh
