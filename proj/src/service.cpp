#include "fh/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace fh {
using nlohmann::json;

namespace {

constexpr int kBadRequest = 400;

ServiceError bad_request(const std::string& message) { return {kBadRequest, "bad_request", message}; }

json attrs_json(const AttributeVector& a) { return json(a.values); }

AttributeVector parse_attribute_field(const json& j) {
  if (j.is_array()) {
    if (j.size() != kNumAttributes) {
      throw bad_request("attributes must list " + std::to_string(kNumAttributes) + " values, got " +
                        std::to_string(j.size()));
    }
    AttributeVector a;
    for (int i = 0; i < kNumAttributes; ++i) {
      const json& v = j[static_cast<std::size_t>(i)];
      if (!v.is_number()) throw bad_request("attribute values must be numbers");
      a[i] = v.get<double>();
    }
    return a;
  }
  if (j.is_object()) {
    AttributeVector a;
    std::vector<bool> seen(kNumAttributes, false);
    for (const auto& [name, v] : j.items()) {
      int idx;
      try {
        idx = attribute_index(name);
      } catch (const std::invalid_argument& e) {
        throw bad_request(e.what());
      }
      if (!v.is_number()) throw bad_request("attribute '" + name + "' must be a number");
      a[idx] = v.get<double>();
      seen[static_cast<std::size_t>(idx)] = true;
    }
    for (int i = 0; i < kNumAttributes; ++i) {
      if (!seen[static_cast<std::size_t>(i)]) {
        throw bad_request("attribute object lacks '" + std::string(kAttributeNames[static_cast<std::size_t>(i)]) + "'");
      }
    }
    return a;
  }
  throw bad_request("attributes must be an array of 12 numbers or an object keyed by attribute name");
}

Image parse_lr_image(const json& body) {
  auto it = body.find("lr_image");
  if (it == body.end() || !it->is_string()) throw bad_request("missing string field 'lr_image' (base64 PNG)");
  Image img;
  try {
    const auto bytes = base64_decode(it->get<std::string>());
    img = decode_lossless(bytes);
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  }
  if (img.height() != kLrSize || img.width() != kLrSize) {
    throw bad_request("lr_image must be 16x16, got " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()));
  }
  return img;
}

bool optional_bool(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return false;
  if (!it->is_boolean()) throw bad_request(std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

void validate_attributes(const AttributeVector& a) {
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::string s = text;
  if (s.rfind("data:", 0) == 0) {
    const auto comma = s.find(',');
    if (comma == std::string::npos || s.substr(0, comma).find(";base64") == std::string::npos) {
      throw std::invalid_argument("data URL is not base64 encoded");
    }
    s = s.substr(comma + 1);
  }
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.empty() || s.size() % 4 != 0) throw std::invalid_argument("invalid base64 payload");
  std::vector<std::uint8_t> out(s.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(s.data()), static_cast<int>(s.size()));
  if (n < 0) throw std::invalid_argument("invalid base64 payload");
  std::size_t pad = 0;
  if (s.back() == '=') ++pad;
  if (s.size() >= 2 && s[s.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

json HallucinationResponse::to_json() const {
  json j;
  json outs = json::object();
  for (const auto& [res, img] : outputs) {
    const auto png = encode_png(img);
    outs[std::to_string(res)] = base64_encode(png);
  }
  j["outputs"] = outs;
  j["used_attributes"] = attrs_json(used_attributes);
  j["classifier_attributes"] = attrs_json(classifier_attributes);
  if (critic_attribute_predictions) {
    json preds = json::object();
    for (const auto& [stage, a] : *critic_attribute_predictions) preds[std::to_string(stage)] = attrs_json(a);
    j["critic_attribute_predictions"] = preds;
  }
  if (!edits.empty() || base_attributes) {
    json e = json::object();
    for (const auto& [name, v] : edits) e[name] = v;
    j["edits"] = e;
    if (base_attributes) j["base_attributes"] = attrs_json(*base_attributes);
  }
  json names = json::array();
  for (auto n : kAttributeNames) names.push_back(std::string(n));
  j["attribute_names"] = names;
  return j;
}

std::unique_ptr<Service> Service::load(const std::filesystem::path& checkpoint) {
  auto model = Model::load(checkpoint);
  if (model->stage != 3) {
    throw std::runtime_error("checkpoint " + checkpoint.string() + " is at stage " + std::to_string(model->stage) +
                             "; the service needs a stage-3 checkpoint");
  }
  return std::make_unique<Service>(std::move(model));
}

Service::Service(std::unique_ptr<Model> model) : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("service needs a model");
}

AttributeVector Service::classify(const Image& lr) const { return model_->nets.classifier.classify(lr); }

HallucinationResponse Service::hallucinate(const HallucinationRequest& req) const {
  if (req.lr.height() != kLrSize || req.lr.width() != kLrSize) throw bad_request("lr image must be 16x16");
  HallucinationResponse resp;
  resp.classifier_attributes = classify(req.lr);
  resp.used_attributes = req.attributes.value_or(resp.classifier_attributes);
  validate_attributes(resp.used_attributes);

  NoGradGuard no_grad;
  const AttributeVector one[] = {resp.used_attributes};
  StageOutputs out = model_->nets.generator.forward(constant(req.lr.to_tensor()), constant(attributes_to_tensor(one)),
                                                     3, ForwardOptions::eval());
  for (int s = req.return_stages ? 1 : 3; s <= 3; ++s) {
    resp.outputs[kStageResolutions[static_cast<std::size_t>(s - 1)]] = Image::from_tensor(out.image(s).value()).clamped();
  }
  if (req.return_attribute_predictions) {
    std::map<int, AttributeVector> preds;
    for (int s = 1; s <= 3; ++s) {
      const Critic& critic = model_->nets.critics[static_cast<std::size_t>(s - 1)];
      preds[s] = attributes_from_tensor(critic.forward(out.image(s)).attr.value());
    }
    resp.critic_attribute_predictions = std::move(preds);
  }
  return resp;
}

HallucinationResponse Service::manipulate(const Image& lr, const std::optional<AttributeVector>& base,
                                          const std::map<std::string, double>& edits, bool return_stages,
                                          bool return_attribute_predictions) const {
  AttributeVector attrs = base ? *base : classify(lr);
  validate_attributes(attrs);
  std::vector<std::pair<int, double>> applied;
  for (const auto& [name, value] : edits) {
    int idx;
    try {
      idx = attribute_index(name);
    } catch (const std::invalid_argument& e) {
      throw bad_request(e.what());
    }
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      throw bad_request("edit '" + name + "' = " + std::to_string(value) + " is outside [0,1]");
    }
    applied.emplace_back(idx, value);
  }
  const AttributeVector original = attrs;
  std::sort(applied.begin(), applied.end());
  for (const auto& [idx, value] : applied) attrs[idx] = value;
  HallucinationResponse resp = hallucinate({lr, attrs, return_stages, return_attribute_predictions});
  for (const auto& [idx, value] : applied) {
    resp.edits.emplace_back(std::string(kAttributeNames[static_cast<std::size_t>(idx)]), value);
  }
  resp.base_attributes = original;
  return resp;
}

json Service::handle_hallucinate(const json& body) const {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  const Image lr = parse_lr_image(body);
  std::optional<AttributeVector> attrs;
  if (auto it = body.find("attributes"); it != body.end() && !it->is_null()) attrs = parse_attribute_field(*it);
  const bool stages = optional_bool(body, "return_stages");
  const bool preds = optional_bool(body, "return_attribute_predictions");
  if (auto it = body.find("edits"); it != body.end() && !it->is_null()) {
    if (!it->is_object()) throw bad_request("edits must be an object of attribute name to value");
    std::map<std::string, double> edits;
    for (const auto& [name, v] : it->items()) {
      if (!v.is_number()) throw bad_request("edit '" + name + "' must be a number");
      edits[name] = v.get<double>();
    }
    return manipulate(lr, attrs, edits, stages, preds).to_json();
  }
  return hallucinate({lr, attrs, stages, preds}).to_json();
}

json Service::handle_classify(const json& body) const {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  const AttributeVector a = classify(parse_lr_image(body));
  json names = json::array();
  for (auto n : kAttributeNames) names.push_back(std::string(n));
  return {{"attributes", attrs_json(a)}, {"attribute_names", names}};
}

}  // namespace fh
