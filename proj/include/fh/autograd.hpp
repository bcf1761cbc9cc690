#pragma once

// Reverse-mode automatic differentiation over NCHW tensors.
//
// Backward rules are written in terms of the same differentiable ops, so
// gradients can themselves be differentiated (create_graph = true). The
// gradient penalty relies on this: it differentiates the norm of an input
// gradient with respect to critic weights.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fh/kernels.hpp"
#include "fh/tensor.hpp"

namespace fh {

class Var;

/// Returns one gradient per node input; entries for inputs whose `needs` flag
/// is false may be left undefined.
using BackwardFn = std::function<std::vector<Var>(const Var& grad, const std::vector<bool>& needs)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
  const char* op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  [[nodiscard]] const Tensor& value() const { return node_->value; }
  /// Leaf parameters are updated in place by optimizers.
  [[nodiscard]] Tensor& mutable_value() { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  [[nodiscard]] double item() const { return node_->value.item(); }
  [[nodiscard]] Node* node() const { return node_.get(); }

  /// Records an op result. Without grad mode or differentiable inputs the
  /// result is a plain constant.
  static Var make(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op);

 private:
  std::shared_ptr<Node> node_;
};

[[nodiscard]] bool grad_enabled();

/// Scoped override of grad recording for the current thread.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

/// d(output)/d(inputs). `output` must be a scalar unless `seed` is given.
/// With create_graph the returned gradients are differentiable.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph = false,
                      const Var& seed = {});

Var constant(Tensor t);
Var detach(const Var& v);

// Elementwise. Binary ops broadcast size-1 extents.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// x^p for x > 0, zero elsewhere (including its derivative).
Var pow_pos(const Var& a, double p);
Var sqrt_pos(const Var& a);
Var log(const Var& a);
Var abs(const Var& a);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var relu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Reductions and shape ops.
Var sum(const Var& a);
Var mean(const Var& a);
/// Per-sample sum: [N,C,H,W] -> [N,1,1,1].
Var sample_sum(const Var& a);
Var expand(const Var& a, const Shape& shape);
/// Sums broadcast extents away so the result has `shape`.
Var reduce_to(const Var& a, const Shape& shape);
Var reshape(const Var& a, const Shape& shape);
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& a, int start, int count);
Var pad_channels(const Var& a, int start, int total);

// Spatial ops.
Var conv2d(const Var& x, const Var& w, ConvGeometry geo);
/// Transposed convolution; `w` is [C_in, C_out, k, k].
Var conv_transpose2d(const Var& x, const Var& w, ConvGeometry geo, int out_h, int out_w);
Var conv2d_weight_grad(const Var& x, const Var& g, int kh, int kw, ConvGeometry geo);
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var resize_bilinear_adjoint(const Var& g, int in_h, int in_w);
Var maxpool2x2(const Var& x);

}  // namespace fh
