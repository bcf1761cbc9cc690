#pragma once

#include <cstdint>
#include <vector>

#include "fh/autograd.hpp"

namespace fh {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig config);

  /// One update; `grads` aligns with the parameter list.
  void step(const std::vector<Var>& grads);

  [[nodiscard]] std::int64_t steps() const { return steps_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }

  [[nodiscard]] const std::vector<Tensor>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<Tensor>& second_moments() const { return v_; }
  void restore(std::int64_t steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  std::vector<Var> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

}  // namespace fh
