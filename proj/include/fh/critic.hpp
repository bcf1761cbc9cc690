#pragma once

#include <cstdint>
#include <functional>

#include "fh/layers.hpp"

namespace fh {

struct CriticConfig {
  int stage = 1;
  int base_channels = 64;
  int max_channels = 512;

  void validate() const;
  [[nodiscard]] int resolution() const { return 16 << stage; }
};

struct CriticOutput {
  Var adv;   // [N,1,1,1], unbounded
  Var attr;  // [N,12,1,1], probabilities
};

/// Stage-specific critic: stride-2 trunk down to 4x4, then an adversarial
/// head and an attribute head. No normalisation layers.
class Critic {
 public:
  Critic(const CriticConfig& config, std::uint64_t seed);

  /// x must be [N,3,R,R] with R the stage resolution.
  [[nodiscard]] CriticOutput forward(const Var& x) const;
  [[nodiscard]] Var adversarial(const Var& x) const { return forward(x).adv; }

  [[nodiscard]] const CriticConfig& config() const { return config_; }
  [[nodiscard]] int resolution() const { return config_.resolution(); }
  [[nodiscard]] ParamStore& store() { return store_; }
  [[nodiscard]] const ParamStore& store() const { return store_; }

 private:
  CriticConfig config_;
  ParamStore store_;
  std::vector<Conv2d> trunk_;
  Conv2d adv_head_;
  Conv2d attr_head_;
};

/// Maps a batch of images to per-sample scores [N,1,1,1].
using AdversarialFn = std::function<Var(const Var&)>;

/// t * real + (1 - t) * fake with t of shape [N,1,1,1].
Tensor interpolate(const Tensor& real, const Tensor& fake, const Tensor& t);

/// Per-sample input-gradient norms of `adv` at the interpolates, [N,1,1,1].
/// With create_graph the result is differentiable in the critic's parameters.
Var interpolated_gradient_norms(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t,
                                bool create_graph);

/// E[(||grad|| - 1)^2] over the batch, without the lambda factor.
Var gradient_penalty_raw(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t);

/// lambda * E[(||grad|| - 1)^2].
Var gradient_penalty(const AdversarialFn& adv, const Tensor& real, const Tensor& fake, const Tensor& t,
                     double lambda);
Var gradient_penalty(const Critic& critic, const Tensor& real, const Tensor& fake, const Tensor& t, double lambda);

}  // namespace fh
