#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fh/autograd.hpp"

namespace fh {

/// Named tensors owned by one network. Trainable parameters are leaves with
/// requires_grad; buffers (batch-norm running statistics) are plain leaves.
/// Entries keep insertion order, which fixes checkpoint and optimizer layout.
class ParamStore {
 public:
  Var add_param(const std::string& name, Tensor init);
  Var add_buffer(const std::string& name, Tensor init);

  [[nodiscard]] const std::vector<Var>& params() const { return params_; }
  [[nodiscard]] const std::vector<std::string>& param_names() const { return param_names_; }
  [[nodiscard]] std::size_t parameter_count() const;

  /// Parameters followed by buffers, in insertion order.
  [[nodiscard]] std::vector<std::pair<std::string, Var>> named_tensors() const;
  /// Copies `values[name]` into every entry; missing names or shape mismatches throw.
  void load(const std::map<std::string, Tensor>& values);

 private:
  void check_new(const std::string& name) const;

  std::vector<Var> params_;
  std::vector<std::string> param_names_;
  std::vector<Var> buffers_;
  std::vector<std::string> buffer_names_;
};

/// Batch-norm and similar layers behave differently in training.
struct ForwardOptions {
  bool training = true;
  /// Training-mode batch norm also folds batch statistics into running statistics.
  bool update_stats = true;

  static ForwardOptions eval() { return {false, false}; }
};

using Rng = std::mt19937_64;

/// He-normal initialisation for a layer followed by a (leaky) rectifier.
Tensor he_normal(Shape shape, int fan_in, double leaky_slope, Rng& rng);

struct Conv2d {
  Var weight;
  Var bias;  // undefined when the layer has no bias
  ConvGeometry geo;

  [[nodiscard]] Var forward(const Var& x) const;
};

Conv2d make_conv(ParamStore& store, const std::string& name, int in, int out, int k, ConvGeometry geo, bool bias,
                 double leaky_slope, Rng& rng);

/// Learned 2x upsampling: 4x4 kernel, stride 2, padding 1.
struct ConvTranspose2d {
  Var weight;  // [in, out, 4, 4]
  ConvGeometry geo{2, 1};

  [[nodiscard]] Var forward(const Var& x) const;
};

ConvTranspose2d make_conv_transpose(ParamStore& store, const std::string& name, int in, int out, Rng& rng);

struct BatchNorm2d {
  Var gamma;
  Var beta;
  Var running_mean;
  Var running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  [[nodiscard]] Var forward(const Var& x, const ForwardOptions& opt) const;
};

BatchNorm2d make_batch_norm(ParamStore& store, const std::string& name, int channels);

}  // namespace fh
