#include "fh/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fh {

void ParamStore::check_new(const std::string& name) const {
  if (std::find(param_names_.begin(), param_names_.end(), name) != param_names_.end() ||
      std::find(buffer_names_.begin(), buffer_names_.end(), name) != buffer_names_.end()) {
    throw std::logic_error("duplicate tensor name " + name);
  }
}

Var ParamStore::add_param(const std::string& name, Tensor init) {
  check_new(name);
  params_.emplace_back(std::move(init), true);
  param_names_.push_back(name);
  return params_.back();
}

Var ParamStore::add_buffer(const std::string& name, Tensor init) {
  check_new(name);
  buffers_.emplace_back(std::move(init), false);
  buffer_names_.push_back(name);
  return buffers_.back();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value().size();
  return total;
}

std::vector<std::pair<std::string, Var>> ParamStore::named_tensors() const {
  std::vector<std::pair<std::string, Var>> out;
  out.reserve(params_.size() + buffers_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back(param_names_[i], params_[i]);
  for (std::size_t i = 0; i < buffers_.size(); ++i) out.emplace_back(buffer_names_[i], buffers_[i]);
  return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& values) {
  for (auto& [name, var] : named_tensors()) {
    auto it = values.find(name);
    if (it == values.end()) throw std::runtime_error("missing tensor " + name);
    if (it->second.shape() != var.shape()) {
      throw std::runtime_error("tensor " + name + " has shape " + it->second.shape().str() + ", expected " +
                               var.shape().str());
    }
    Var handle = var;
    handle.mutable_value() = it->second;
  }
}

Tensor he_normal(Shape shape, int fan_in, double leaky_slope, Rng& rng) {
  const double stddev = std::sqrt(2.0 / ((1.0 + leaky_slope * leaky_slope) * fan_in));
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(shape);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

Var Conv2d::forward(const Var& x) const {
  Var y = conv2d(x, weight, geo);
  return bias.defined() ? add(y, bias) : y;
}

Conv2d make_conv(ParamStore& store, const std::string& name, int in, int out, int k, ConvGeometry geo, bool bias,
                 double leaky_slope, Rng& rng) {
  Conv2d c;
  c.weight = store.add_param(name + ".weight", he_normal(Shape{out, in, k, k}, in * k * k, leaky_slope, rng));
  if (bias) c.bias = store.add_param(name + ".bias", Tensor(Shape{1, out, 1, 1}));
  c.geo = geo;
  return c;
}

Var ConvTranspose2d::forward(const Var& x) const {
  return conv_transpose2d(x, weight, geo, x.shape().h * 2, x.shape().w * 2);
}

ConvTranspose2d make_conv_transpose(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  ConvTranspose2d c;
  // Each output pixel of a stride-2, 4x4 transposed convolution sees 2x2 taps per input channel.
  c.weight = store.add_param(name + ".weight", he_normal(Shape{in, out, 4, 4}, in * 4, 0.0, rng));
  return c;
}

Var BatchNorm2d::forward(const Var& x, const ForwardOptions& opt) const {
  const Shape s = x.shape();
  const Shape per_channel{1, s.c, 1, 1};
  if (!opt.training) {
    Tensor inv(per_channel);
    for (int c = 0; c < s.c; ++c) inv[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(running_var.value()[static_cast<std::size_t>(c)] + eps);
    Var centred = sub(x, constant(running_mean.value()));
    return add(mul(mul(centred, constant(std::move(inv))), gamma), beta);
  }
  const double count = static_cast<double>(s.n) * s.h * s.w;
  Var mu = scale(reduce_to(x, per_channel), 1.0 / count);
  Var centred = sub(x, mu);
  Var var = scale(reduce_to(mul(centred, centred), per_channel), 1.0 / count);
  Var inv = pow_pos(add_scalar(var, eps), -0.5);
  Var y = add(mul(mul(centred, inv), gamma), beta);
  if (opt.update_stats) {
    Var rm = running_mean;
    Var rv = running_var;
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    for (int c = 0; c < s.c; ++c) {
      const auto i = static_cast<std::size_t>(c);
      rm.mutable_value()[i] = (1.0 - momentum) * rm.value()[i] + momentum * mu.value()[i];
      rv.mutable_value()[i] = (1.0 - momentum) * rv.value()[i] + momentum * var.value()[i] * unbias;
    }
  }
  return y;
}

BatchNorm2d make_batch_norm(ParamStore& store, const std::string& name, int channels) {
  BatchNorm2d bn;
  const Shape s{1, channels, 1, 1};
  bn.gamma = store.add_param(name + ".gamma", Tensor(s, 1.0));
  bn.beta = store.add_param(name + ".beta", Tensor(s, 0.0));
  bn.running_mean = store.add_buffer(name + ".running_mean", Tensor(s, 0.0));
  bn.running_var = store.add_buffer(name + ".running_var", Tensor(s, 1.0));
  return bn;
}

}  // namespace fh
