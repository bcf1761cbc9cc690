#pragma once

// Numeric kernels behind the autograd ops. Two implementations share one
// signature set:
//
//   fh::kernels    OpenMP-parallel, tiled im2col/GEMM; used everywhere.
//   fh::reference  straightforward serial loops; kept for tests and benchmarks.
//
// Every parallel kernel assigns each output element to exactly one thread and
// accumulates in a fixed order, so results are bitwise identical for any
// thread count.

#include <vector>

#include "fh/tensor.hpp"

namespace fh {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

[[nodiscard]] inline int conv_out_size(int in, int k, ConvGeometry g) {
  return (in + 2 * g.pad - k) / g.stride + 1;
}

/// Indices into the input plane chosen by a 2x2/stride-2 max pool.
struct PoolResult {
  Tensor out;
  std::vector<int> argmax;
};

namespace kernels {

/// y[n,o] = sum_c w[o,c] (*) x[n,c]; w is [O, C, kh, kw].
Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry geo);
/// Adjoint of conv2d with respect to x (also the transposed-convolution forward).
Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, ConvGeometry geo, int in_h, int in_w);
/// Adjoint of conv2d with respect to w.
Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, int kh, int kw, ConvGeometry geo);

/// Half-pixel-centred bilinear resampling with edge clamping.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
Tensor resize_bilinear_adjoint(const Tensor& g, int in_h, int in_w);

/// Box average over factor x factor blocks.
Tensor downsample_area(const Tensor& x, int factor);

PoolResult maxpool2x2(const Tensor& x);
Tensor pool_scatter(const Tensor& g, const std::vector<int>& argmax, const Shape& in_shape);
Tensor pool_gather(const Tensor& x, const std::vector<int>& argmax, const Shape& out_shape);

}  // namespace kernels

namespace reference {

Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry geo);
Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, ConvGeometry geo, int in_h, int in_w);
Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, int kh, int kw, ConvGeometry geo);
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
Tensor resize_bilinear_adjoint(const Tensor& g, int in_h, int in_w);
Tensor downsample_area(const Tensor& x, int factor);
PoolResult maxpool2x2(const Tensor& x);

}  // namespace reference

}  // namespace fh
