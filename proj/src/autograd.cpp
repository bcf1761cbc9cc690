#include "fh/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace fh {
namespace {

thread_local bool g_grad_enabled = true;

constexpr std::size_t kParallelThreshold = 1u << 14;

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* src = a.data();
  double* dst = out.data();
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for simd if (a.size() > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const double* x = a.data();
  const double* y = b.data();
  double* dst = out.data();
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for simd if (a.size() > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(x[i], y[i]);
  return out;
}

int broadcast_dim(int a, int b, const Shape& sa, const Shape& sb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw std::invalid_argument("cannot broadcast " + sa.str() + " with " + sb.str());
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  return {broadcast_dim(a.n, b.n, a, b), broadcast_dim(a.c, b.c, a, b), broadcast_dim(a.h, b.h, a, b),
          broadcast_dim(a.w, b.w, a, b)};
}

bool broadcastable_to(const Shape& from, const Shape& to) {
  const auto f = from.dims();
  const auto t = to.dims();
  for (int i = 0; i < 4; ++i) {
    if (f[static_cast<std::size_t>(i)] != t[static_cast<std::size_t>(i)] && f[static_cast<std::size_t>(i)] != 1) {
      return false;
    }
  }
  return true;
}

Tensor expand_tensor(const Tensor& a, const Shape& to) {
  const Shape s = a.shape();
  Tensor out(to);
  const int sn = s.n == 1 ? 0 : 1;
  const int sc = s.c == 1 ? 0 : 1;
  const int sh = s.h == 1 ? 0 : 1;
  const int sw = s.w == 1 ? 0 : 1;
  for (int n = 0; n < to.n; ++n)
    for (int c = 0; c < to.c; ++c)
      for (int h = 0; h < to.h; ++h) {
        double* row = &out.at(n, c, h, 0);
        for (int w = 0; w < to.w; ++w) row[w] = a.at(n * sn, c * sc, h * sh, w * sw);
      }
  return out;
}

Tensor reduce_tensor(const Tensor& a, const Shape& to) {
  const Shape s = a.shape();
  Tensor out(to);
  const int sn = to.n == 1 ? 0 : 1;
  const int sc = to.c == 1 ? 0 : 1;
  const int sh = to.h == 1 ? 0 : 1;
  const int sw = to.w == 1 ? 0 : 1;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h) {
        const double* row = a.data() + ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w;
        if (sw == 0) {
          double acc = 0.0;
          for (int w = 0; w < s.w; ++w) acc += row[w];
          out.at(n * sn, c * sc, h * sh, 0) += acc;
        } else {
          double* dst = &out.at(n * sn, c * sc, h * sh, 0);
          for (int w = 0; w < s.w; ++w) dst[w] += row[w];
        }
      }
  return out;
}

Var scatter_pool(const Var& g, std::shared_ptr<const std::vector<int>> idx, const Shape& in_shape);

Var gather_pool(const Var& x, std::shared_ptr<const std::vector<int>> idx, const Shape& out_shape) {
  Tensor v = kernels::pool_gather(x.value(), *idx, out_shape);
  const Shape in_shape = x.shape();
  return Var::make(std::move(v), {x},
                   [idx, in_shape](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{scatter_pool(g, idx, in_shape)};
                   },
                   "gather_pool");
}

Var scatter_pool(const Var& g, std::shared_ptr<const std::vector<int>> idx, const Shape& in_shape) {
  Tensor v = kernels::pool_scatter(g.value(), *idx, in_shape);
  const Shape out_shape = g.shape();
  return Var::make(std::move(v), {g},
                   [idx, out_shape](const Var& gg, const std::vector<bool>&) {
                     return std::vector<Var>{gather_pool(gg, idx, out_shape)};
                   },
                   "scatter_pool");
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::make(Tensor value, std::vector<Var> inputs, BackwardFn fn, const char* op) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs = std::move(inputs);
  out.node_->backward = std::move(fn);
  out.node_->op = op;
  return out;
}

bool grad_enabled() { return g_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph, const Var& seed) {
  std::vector<Var> result(inputs.size());
  auto zeros_for = [&](std::size_t i) { return constant(Tensor(inputs[i].shape())); };
  if (!output.requires_grad()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) result[i] = zeros_for(i);
    return result;
  }
  if (!seed.defined() && output.value().size() != 1) {
    throw std::invalid_argument("grad of non-scalar output " + output.shape().str() + " needs a seed");
  }

  // Post-order over the differentiable subgraph: inputs precede consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_set<Node*> targets;
  for (const auto& v : inputs) targets.insert(v.node());
  std::unordered_set<Node*> relevant;
  for (Node* node : order) {
    bool r = targets.count(node) > 0;
    for (const auto& in : node->inputs) r = r || relevant.count(in.node()) > 0;
    if (r) relevant.insert(node);
  }

  std::unordered_map<Node*, Var> grads;
  grads[output.node()] = seed.defined() ? seed : constant(Tensor(output.shape(), 1.0));

  GradModeGuard mode(create_graph);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!relevant.count(node) || !node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    Var g = found->second;
    if (!targets.count(node)) grads.erase(found);

    std::vector<bool> needs(node->inputs.size());
    for (std::size_t i = 0; i < needs.size(); ++i) {
      needs[i] = node->inputs[i].requires_grad() && relevant.count(node->inputs[i].node()) > 0;
    }
    std::vector<Var> in_grads = node->backward(g, needs);
    for (std::size_t i = 0; i < needs.size(); ++i) {
      if (!needs[i] || i >= in_grads.size() || !in_grads[i].defined()) continue;
      Node* in = node->inputs[i].node();
      if (in_grads[i].shape() != in->value.shape()) {
        throw std::logic_error(std::string("gradient shape mismatch in op ") + node->op);
      }
      auto slot = grads.find(in);
      if (slot == grads.end()) {
        grads.emplace(in, in_grads[i]);
      } else {
        slot->second = add(slot->second, in_grads[i]);
      }
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto found = grads.find(inputs[i].node());
    result[i] = found != grads.end() ? found->second : zeros_for(i);
  }
  return result;
}

Var constant(Tensor t) { return Var(std::move(t), false); }
Var detach(const Var& v) { return Var(v.value(), false); }

Var expand(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (!broadcastable_to(a.shape(), shape)) {
    throw std::invalid_argument("cannot expand " + a.shape().str() + " to " + shape.str());
  }
  const Shape from = a.shape();
  return Var::make(expand_tensor(a.value(), shape), {a},
                   [from](const Var& g, const std::vector<bool>&) { return std::vector<Var>{reduce_to(g, from)}; },
                   "expand");
}

Var reduce_to(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (!broadcastable_to(shape, a.shape())) {
    throw std::invalid_argument("cannot reduce " + a.shape().str() + " to " + shape.str());
  }
  const Shape from = a.shape();
  return Var::make(reduce_tensor(a.value(), shape), {a},
                   [from](const Var& g, const std::vector<bool>&) { return std::vector<Var>{expand(g, from)}; },
                   "reduce_to");
}

Var add(const Var& a, const Var& b) {
  const Shape s = broadcast_shape(a.shape(), b.shape());
  Var ea = expand(a, s);
  Var eb = expand(b, s);
  return Var::make(map_binary(ea.value(), eb.value(), [](double x, double y) { return x + y; }), {ea, eb},
                   [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  const Shape s = broadcast_shape(a.shape(), b.shape());
  Var ea = expand(a, s);
  Var eb = expand(b, s);
  return Var::make(map_binary(ea.value(), eb.value(), [](double x, double y) { return x - y; }), {ea, eb},
                   [](const Var& g, const std::vector<bool>& needs) {
                     return std::vector<Var>{g, needs[1] ? neg(g) : Var{}};
                   },
                   "sub");
}

Var mul(const Var& a, const Var& b) {
  const Shape s = broadcast_shape(a.shape(), b.shape());
  Var ea = expand(a, s);
  Var eb = expand(b, s);
  return Var::make(map_binary(ea.value(), eb.value(), [](double x, double y) { return x * y; }), {ea, eb},
                   [ea, eb](const Var& g, const std::vector<bool>& needs) {
                     return std::vector<Var>{needs[0] ? mul(g, eb) : Var{}, needs[1] ? mul(g, ea) : Var{}};
                   },
                   "mul");
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  return Var::make(map_unary(a.value(), [c](double x) { return c * x; }), {a},
                   [c](const Var& g, const std::vector<bool>&) { return std::vector<Var>{scale(g, c)}; }, "scale");
}

Var add_scalar(const Var& a, double c) {
  return Var::make(map_unary(a.value(), [c](double x) { return x + c; }), {a},
                   [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; }, "add_scalar");
}

Var pow_pos(const Var& a, double p) {
  return Var::make(map_unary(a.value(), [p](double x) { return x > 0.0 ? std::pow(x, p) : 0.0; }), {a},
                   [a, p](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{mul(g, scale(pow_pos(a, p - 1.0), p))};
                   },
                   "pow_pos");
}

Var sqrt_pos(const Var& a) { return pow_pos(a, 0.5); }

Var log(const Var& a) {
  return Var::make(map_unary(a.value(), [](double x) { return std::log(x); }), {a},
                   [a](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, pow_pos(a, -1.0))}; },
                   "log");
}

Var abs(const Var& a) {
  return Var::make(map_unary(a.value(), [](double x) { return std::abs(x); }), {a},
                   [a](const Var& g, const std::vector<bool>&) {
                     Var sign = constant(map_unary(a.value(), [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }));
                     return std::vector<Var>{mul(g, sign)};
                   },
                   "abs");
}

Var sigmoid(const Var& a) {
  return Var::make(map_unary(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); }), {a},
                   [a](const Var& g, const std::vector<bool>&) {
                     Var s = sigmoid(a);
                     return std::vector<Var>{mul(g, mul(s, add_scalar(neg(s), 1.0)))};
                   },
                   "sigmoid");
}

Var leaky_relu(const Var& a, double slope) {
  return Var::make(map_unary(a.value(), [slope](double x) { return x > 0.0 ? x : slope * x; }), {a},
                   [a, slope](const Var& g, const std::vector<bool>&) {
                     Var mask = constant(map_unary(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; }));
                     return std::vector<Var>{mul(g, mask)};
                   },
                   "leaky_relu");
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var clamp(const Var& a, double lo, double hi) {
  return Var::make(map_unary(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); }), {a},
                   [a, lo, hi](const Var& g, const std::vector<bool>&) {
                     Var mask = constant(map_unary(a.value(), [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; }));
                     return std::vector<Var>{mul(g, mask)};
                   },
                   "clamp");
}

Var sum(const Var& a) { return reduce_to(a, Shape{1, 1, 1, 1}); }

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sample_sum(const Var& a) { return reduce_to(a, Shape{a.shape().n, 1, 1, 1}); }

Var reshape(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  const Shape from = a.shape();
  return Var::make(a.value().reshaped(shape), {a},
                   [from](const Var& g, const std::vector<bool>&) { return std::vector<Var>{reshape(g, from)}; },
                   "reshape");
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw std::invalid_argument("concat_channels mismatch " + sa.str() + " vs " + sb.str());
  }
  Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t pa = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t pb = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().data() + n * pa, pa, out.data() + n * (pa + pb));
    std::copy_n(b.value().data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
  }
  const int ca = sa.c;
  const int cb = sb.c;
  return Var::make(std::move(out), {a, b},
                   [ca, cb](const Var& g, const std::vector<bool>& needs) {
                     return std::vector<Var>{needs[0] ? slice_channels(g, 0, ca) : Var{},
                                             needs[1] ? slice_channels(g, ca, cb) : Var{}};
                   },
                   "concat_channels");
}

Var slice_channels(const Var& a, int start, int count) {
  const Shape s = a.shape();
  if (start < 0 || count < 0 || start + count > s.c) throw std::out_of_range("slice_channels out of range");
  Tensor out(Shape{s.n, count, s.h, s.w});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(a.value().data() + (static_cast<std::size_t>(n) * s.c + start) * plane, count * plane,
                out.data() + static_cast<std::size_t>(n) * count * plane);
  }
  const int total = s.c;
  return Var::make(std::move(out), {a},
                   [start, total](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{pad_channels(g, start, total)};
                   },
                   "slice_channels");
}

Var pad_channels(const Var& a, int start, int total) {
  const Shape s = a.shape();
  if (start < 0 || start + s.c > total) throw std::out_of_range("pad_channels out of range");
  Tensor out(Shape{s.n, total, s.h, s.w});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(a.value().data() + static_cast<std::size_t>(n) * s.c * plane, s.c * plane,
                out.data() + (static_cast<std::size_t>(n) * total + start) * plane);
  }
  const int count = s.c;
  return Var::make(std::move(out), {a},
                   [start, count](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{slice_channels(g, start, count)};
                   },
                   "pad_channels");
}

Var conv2d(const Var& x, const Var& w, ConvGeometry geo) {
  const int h = x.shape().h;
  const int wd = x.shape().w;
  return Var::make(kernels::conv2d(x.value(), w.value(), geo), {x, w},
                   [x, w, geo, h, wd](const Var& g, const std::vector<bool>& needs) {
                     return std::vector<Var>{
                         needs[0] ? conv_transpose2d(g, w, geo, h, wd) : Var{},
                         needs[1] ? conv2d_weight_grad(x, g, w.shape().h, w.shape().w, geo) : Var{}};
                   },
                   "conv2d");
}

Var conv_transpose2d(const Var& x, const Var& w, ConvGeometry geo, int out_h, int out_w) {
  return Var::make(kernels::conv2d_backward_input(x.value(), w.value(), geo, out_h, out_w), {x, w},
                   [x, w, geo](const Var& g, const std::vector<bool>& needs) {
                     return std::vector<Var>{needs[0] ? conv2d(g, w, geo) : Var{},
                                             needs[1] ? conv2d_weight_grad(g, x, w.shape().h, w.shape().w, geo) : Var{}};
                   },
                   "conv_transpose2d");
}

Var conv2d_weight_grad(const Var& x, const Var& g, int kh, int kw, ConvGeometry geo) {
  const int h = x.shape().h;
  const int wd = x.shape().w;
  return Var::make(kernels::conv2d_backward_weight(x.value(), g.value(), kh, kw, geo), {x, g},
                   [x, g, geo, h, wd](const Var& gw, const std::vector<bool>& needs) {
                     return std::vector<Var>{needs[0] ? conv_transpose2d(g, gw, geo, h, wd) : Var{},
                                             needs[1] ? conv2d(x, gw, geo) : Var{}};
                   },
                   "conv2d_weight_grad");
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const int h = x.shape().h;
  const int w = x.shape().w;
  return Var::make(kernels::resize_bilinear(x.value(), out_h, out_w), {x},
                   [h, w](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{resize_bilinear_adjoint(g, h, w)};
                   },
                   "resize_bilinear");
}

Var resize_bilinear_adjoint(const Var& g, int in_h, int in_w) {
  const int h = g.shape().h;
  const int w = g.shape().w;
  return Var::make(kernels::resize_bilinear_adjoint(g.value(), in_h, in_w), {g},
                   [h, w](const Var& gg, const std::vector<bool>&) {
                     return std::vector<Var>{resize_bilinear(gg, h, w)};
                   },
                   "resize_bilinear_adjoint");
}

Var maxpool2x2(const Var& x) {
  PoolResult r = kernels::maxpool2x2(x.value());
  auto idx = std::make_shared<const std::vector<int>>(std::move(r.argmax));
  const Shape in_shape = x.shape();
  return Var::make(std::move(r.out), {x},
                   [idx, in_shape](const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{scatter_pool(g, idx, in_shape)};
                   },
                   "maxpool2x2");
}

}  // namespace fh
