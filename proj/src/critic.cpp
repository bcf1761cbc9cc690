#include "fh/critic.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fh/attributes.hpp"

namespace fh {
namespace {

constexpr double kLeakySlope = 0.2;

void check_pair(const Tensor& real, const Tensor& fake, const Tensor& t) {
  if (real.shape() != fake.shape()) {
    throw std::invalid_argument("real " + real.shape().str() + " and fake " + fake.shape().str() + " differ");
  }
  if (t.shape() != Shape{real.shape().n, 1, 1, 1}) {
    throw std::invalid_argument("interpolation weights must be [N,1,1,1], got " + t.shape().str());
  }
}

}  // namespace

void CriticConfig::validate() const {
  if (stage < 1 || stage > 3) throw std::invalid_argument("critic stage must be in 1..3, got " + std::to_string(stage));
  if (base_channels < 1 || max_channels < base_channels) {
    throw std::invalid_argument("critic widths need 1 <= base_channels <= max_channels");
  }
}

Critic::Critic(const CriticConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  int in = 3;
  int width = config_.base_channels;
  for (int res = resolution(), i = 1; res > 4; res /= 2, ++i) {
    trunk_.push_back(make_conv(store_, "conv" + std::to_string(i), in, width, 4, {2, 1}, true, kLeakySlope, rng));
    in = width;
    width = std::min(width * 2, config_.max_channels);
  }
  adv_head_ = make_conv(store_, "adv", in, 1, 4, {1, 0}, true, 1.0, rng);
  attr_head_ = make_conv(store_, "attr", in, kNumAttributes, 4, {1, 0}, true, 1.0, rng);
}

CriticOutput Critic::forward(const Var& x) const {
  const Shape s = x.shape();
  const int r = resolution();
  if (s.c != 3 || s.h != r || s.w != r) {
    throw std::invalid_argument("stage-" + std::to_string(config_.stage) + " critic expects [N,3," + std::to_string(r) +
                                "," + std::to_string(r) + "], got " + s.str());
  }
  Var h = x;
  for (const auto& c : trunk_) h = leaky_relu(c.forward(h), kLeakySlope);
  return {adv_head_.forward(h), sigmoid(attr_head_.forward(h))};
}

Tensor interpolate(const Tensor& real, const Tensor& fake, const Tensor& t) {
  check_pair(real, fake, t);
  Tensor out(real.shape());
  const std::size_t per = real.shape().numel() / static_cast<std::size_t>(real.shape().n);
  for (int n = 0; n < real.shape().n; ++n) {
    const double tn = t[static_cast<std::size_t>(n)];
    for (std::size_t i = n * per; i < (n + 1) * per; ++i) out[i] = tn * real[i] + (1.0 - tn) * fake[i];
  }
  return out;
}

Var interpolated_gradient_norms(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t,
                                bool create_graph) {
  GradModeGuard enable(true);
  Var x(interpolate(real, fake, t), true);
  Var scores = adv(x);
  if (scores.shape() != Shape{real.shape().n, 1, 1, 1}) {
    throw std::invalid_argument("adversarial scores must be [N,1,1,1], got " + scores.shape().str());
  }
  Var g = grad(sum(scores), {x}, create_graph)[0];
  return sqrt_pos(sample_sum(mul(g, g)));
}

Var gradient_penalty_raw(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t) {
  Var d = add_scalar(interpolated_gradient_norms(adv, real, fake, t, true), -1.0);
  return mean(mul(d, d));
}

Var gradient_penalty(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t,
                     double lambda) {
  return scale(gradient_penalty_raw(adv, real, fake, t), lambda);
}

Var gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, const Tensor& t, double lambda) {
  return gradient_penalty([&critic](const Var& x) { return critic.adversarial(x); }, real, fake, t, lambda);
}

}  // namespace fh
