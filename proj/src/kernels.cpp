#include "fh/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fh::kernels {
namespace {

struct ConvDims {
  int n, c, h, w;    // input
  int o, kh, kw;     // filters
  int ho, wo;        // output
  int k;             // c * kh * kw
};

ConvDims conv_dims(const Shape& x, const Shape& w, int ho, int wo) {
  return {x.n, x.c, x.h, x.w, w.n, w.h, w.w, ho, wo, w.c * w.h * w.w};
}

// Output rows per im2col tile; keeps a tile around 256 KiB.
int rows_per_tile(const ConvDims& d) {
  const int target = std::clamp(32768 / std::max(d.k, 1), 64, 2048);
  return std::clamp(target / std::max(d.wo, 1), 1, std::max(d.ho, 1));
}

void im2col_rows(const double* x, const ConvDims& d, ConvGeometry g, int r0, int r1, double* col) {
  const int t = (r1 - r0) * d.wo;
  int k = 0;
  for (int c = 0; c < d.c; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * d.h * d.w;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw, ++k) {
        double* dst = col + static_cast<std::size_t>(k) * t;
        for (int r = r0; r < r1; ++r) {
          double* row = dst + static_cast<std::size_t>(r - r0) * d.wo;
          const int ih = r * g.stride - g.pad + kh;
          if (ih < 0 || ih >= d.h) {
            std::fill(row, row + d.wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * d.w;
          for (int ow = 0; ow < d.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kw;
            row[ow] = (iw >= 0 && iw < d.w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_rows(const double* col, const ConvDims& d, ConvGeometry g, int r0, int r1, double* dx) {
  const int t = (r1 - r0) * d.wo;
  int k = 0;
  for (int c = 0; c < d.c; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * d.h * d.w;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw, ++k) {
        const double* src = col + static_cast<std::size_t>(k) * t;
        for (int r = r0; r < r1; ++r) {
          const int ih = r * g.stride - g.pad + kh;
          if (ih < 0 || ih >= d.h) continue;
          const double* row = src + static_cast<std::size_t>(r - r0) * d.wo;
          double* dst = plane + static_cast<std::size_t>(ih) * d.w;
          for (int ow = 0; ow < d.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kw;
            if (iw >= 0 && iw < d.w) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

void check_geometry(ConvGeometry g) {
  if (g.stride < 1 || g.pad < 0) throw std::invalid_argument("invalid convolution geometry");
}

struct Tap {
  int i0;
  int i1;
  double f;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry geo) {
  check_geometry(geo);
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws.c != xs.c) {
    throw std::invalid_argument("conv2d channel mismatch: input " + xs.str() + " weight " + ws.str());
  }
  const int ho = conv_out_size(xs.h, ws.h, geo);
  const int wo = conv_out_size(xs.w, ws.w, geo);
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d output would be empty for " + xs.str());
  const ConvDims d = conv_dims(xs, ws, ho, wo);
  Tensor y(Shape{d.n, d.o, ho, wo});
  const int rpt = rows_per_tile(d);
  const int tiles = (ho + rpt - 1) / rpt;
  const double* wd = w.data();
  double* yd = y.data();

#pragma omp parallel
  {
    std::vector<double> col(static_cast<std::size_t>(d.k) * rpt * wo);
#pragma omp for schedule(static)
    for (int job = 0; job < d.n * tiles; ++job) {
      const int n = job / tiles;
      const int r0 = (job % tiles) * rpt;
      const int r1 = std::min(ho, r0 + rpt);
      const int t = (r1 - r0) * wo;
      im2col_rows(x.data() + static_cast<std::size_t>(n) * d.c * d.h * d.w, d, geo, r0, r1, col.data());
      for (int o = 0; o < d.o; ++o) {
        double* __restrict yo = yd + (static_cast<std::size_t>(n * d.o + o) * ho + r0) * wo;
        const double* wo_row = wd + static_cast<std::size_t>(o) * d.k;
        for (int k = 0; k < d.k; ++k) {
          const double a = wo_row[k];
          const double* __restrict ck = col.data() + static_cast<std::size_t>(k) * t;
#pragma omp simd
          for (int j = 0; j < t; ++j) yo[j] += a * ck[j];
        }
      }
    }
  }
  return y;
}

Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, ConvGeometry geo, int in_h, int in_w) {
  check_geometry(geo);
  const Shape gs = g.shape();
  const Shape ws = w.shape();
  if (gs.c != ws.n) {
    throw std::invalid_argument("conv2d_backward_input channel mismatch: grad " + gs.str() +
                                " weight " + ws.str());
  }
  if (conv_out_size(in_h, ws.h, geo) != gs.h || conv_out_size(in_w, ws.w, geo) != gs.w) {
    throw std::invalid_argument("conv2d_backward_input: input size " + std::to_string(in_h) + "x" +
                                std::to_string(in_w) + " inconsistent with grad " + gs.str());
  }
  const ConvDims d = conv_dims(Shape{gs.n, ws.c, in_h, in_w}, ws, gs.h, gs.w);
  Tensor dx(Shape{d.n, d.c, in_h, in_w});
  const int rpt = rows_per_tile(d);
  const int tiles = (d.ho + rpt - 1) / rpt;
  const double* wd = w.data();
  const double* gd = g.data();

#pragma omp parallel
  {
    std::vector<double> col(static_cast<std::size_t>(d.k) * rpt * d.wo);
#pragma omp for schedule(static)
    for (int n = 0; n < d.n; ++n) {
      double* dxn = dx.data() + static_cast<std::size_t>(n) * d.c * d.h * d.w;
      for (int tile = 0; tile < tiles; ++tile) {
        const int r0 = tile * rpt;
        const int r1 = std::min(d.ho, r0 + rpt);
        const int t = (r1 - r0) * d.wo;
        std::fill(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(d.k) * t, 0.0);
        for (int o = 0; o < d.o; ++o) {
          const double* __restrict go = gd + (static_cast<std::size_t>(n * d.o + o) * d.ho + r0) * d.wo;
          const double* wo_row = wd + static_cast<std::size_t>(o) * d.k;
          for (int k = 0; k < d.k; ++k) {
            const double a = wo_row[k];
            double* __restrict ck = col.data() + static_cast<std::size_t>(k) * t;
#pragma omp simd
            for (int j = 0; j < t; ++j) ck[j] += a * go[j];
          }
        }
        col2im_rows(col.data(), d, geo, r0, r1, dxn);
      }
    }
  }
  return dx;
}

Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, int kh, int kw, ConvGeometry geo) {
  check_geometry(geo);
  const Shape xs = x.shape();
  const Shape gs = g.shape();
  if (xs.n != gs.n) throw std::invalid_argument("conv2d_backward_weight batch mismatch");
  if (conv_out_size(xs.h, kh, geo) != gs.h || conv_out_size(xs.w, kw, geo) != gs.w) {
    throw std::invalid_argument("conv2d_backward_weight: grad " + gs.str() +
                                " inconsistent with input " + xs.str());
  }
  const Shape ws{gs.c, xs.c, kh, kw};
  const ConvDims d = conv_dims(xs, ws, gs.h, gs.w);
  Tensor dw(ws);
  const int rpt = rows_per_tile(d);
  const int tiles = (d.ho + rpt - 1) / rpt;
  const double* gd = g.data();
  double* dwd = dw.data();

#pragma omp parallel
  {
    int tid = 0;
    int nt = 1;
#ifdef _OPENMP
    tid = omp_get_thread_num();
    nt = omp_get_num_threads();
#endif
    // Each thread owns a contiguous block of filters; accumulation order per
    // filter does not depend on the partition.
    const int per = (d.o + nt - 1) / nt;
    const int o0 = std::min(d.o, tid * per);
    const int o1 = std::min(d.o, o0 + per);
    if (o0 < o1) {
      std::vector<double> col(static_cast<std::size_t>(d.k) * rpt * d.wo);
      for (int n = 0; n < d.n; ++n) {
        for (int tile = 0; tile < tiles; ++tile) {
          const int r0 = tile * rpt;
          const int r1 = std::min(d.ho, r0 + rpt);
          const int t = (r1 - r0) * d.wo;
          im2col_rows(x.data() + static_cast<std::size_t>(n) * d.c * d.h * d.w, d, geo, r0, r1, col.data());
          for (int o = o0; o < o1; ++o) {
            const double* __restrict go = gd + (static_cast<std::size_t>(n * d.o + o) * d.ho + r0) * d.wo;
            double* dwo = dwd + static_cast<std::size_t>(o) * d.k;
            for (int k = 0; k < d.k; ++k) {
              const double* __restrict ck = col.data() + static_cast<std::size_t>(k) * t;
              double s = 0.0;
#pragma omp simd reduction(+ : s)
              for (int j = 0; j < t; ++j) s += go[j] * ck[j];
              dwo[k] += s;
            }
          }
        }
      }
    }
  }
  return dw;
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const Shape s = x.shape();
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear to empty size");
  const auto ty = bilinear_taps(s.h, out_h);
  const auto tx = bilinear_taps(s.w, out_w);
  Tensor y(Shape{s.n, s.c, out_h, out_w});
  const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* src = x.data() + static_cast<std::size_t>(p) * s.h * s.w;
    double* dst = y.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      const double* r0 = src + static_cast<std::size_t>(a.i0) * s.w;
      const double* r1 = src + static_cast<std::size_t>(a.i1) * s.w;
      for (int ox = 0; ox < out_w; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const double top = (1.0 - b.f) * r0[b.i0] + b.f * r0[b.i1];
        const double bot = (1.0 - b.f) * r1[b.i0] + b.f * r1[b.i1];
        dst[static_cast<std::size_t>(oy) * out_w + ox] = (1.0 - a.f) * top + a.f * bot;
      }
    }
  }
  return y;
}

Tensor resize_bilinear_adjoint(const Tensor& g, int in_h, int in_w) {
  const Shape s = g.shape();
  const auto ty = bilinear_taps(in_h, s.h);
  const auto tx = bilinear_taps(in_w, s.w);
  Tensor dx(Shape{s.n, s.c, in_h, in_w});
  const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* src = g.data() + static_cast<std::size_t>(p) * s.h * s.w;
    double* dst = dx.data() + static_cast<std::size_t>(p) * in_h * in_w;
    for (int oy = 0; oy < s.h; ++oy) {
      const Tap& a = ty[static_cast<std::size_t>(oy)];
      double* r0 = dst + static_cast<std::size_t>(a.i0) * in_w;
      double* r1 = dst + static_cast<std::size_t>(a.i1) * in_w;
      for (int ox = 0; ox < s.w; ++ox) {
        const Tap& b = tx[static_cast<std::size_t>(ox)];
        const double v = src[static_cast<std::size_t>(oy) * s.w + ox];
        const double top = (1.0 - a.f) * v;
        const double bot = a.f * v;
        r0[b.i0] += (1.0 - b.f) * top;
        r0[b.i1] += b.f * top;
        r1[b.i0] += (1.0 - b.f) * bot;
        r1[b.i1] += b.f * bot;
      }
    }
  }
  return dx;
}

Tensor downsample_area(const Tensor& x, int factor) {
  const Shape s = x.shape();
  if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw std::invalid_argument("downsample factor " + std::to_string(factor) +
                                " does not divide " + s.str());
  }
  const int oh = s.h / factor;
  const int ow = s.w / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  Tensor y(Shape{s.n, s.c, oh, ow});
  const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* src = x.data() + static_cast<std::size_t>(p) * s.h * s.w;
    double* dst = y.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          const double* row = src + static_cast<std::size_t>(oy * factor + dy) * s.w + ox * factor;
          for (int dx = 0; dx < factor; ++dx) acc += row[dx];
        }
        dst[static_cast<std::size_t>(oy) * ow + ox] = acc * inv;
      }
    }
  }
  return y;
}

PoolResult maxpool2x2(const Tensor& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw std::invalid_argument("maxpool2x2 needs even extents");
  const int oh = s.h / 2;
  const int ow = s.w / 2;
  PoolResult r{Tensor(Shape{s.n, s.c, oh, ow}), std::vector<int>(static_cast<std::size_t>(s.n) * s.c * oh * ow)};
  const int planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* src = x.data() + static_cast<std::size_t>(p) * s.h * s.w;
    const std::size_t base = static_cast<std::size_t>(p) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int best = (2 * oy) * s.w + 2 * ox;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * oy + dy) * s.w + 2 * ox + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = base + static_cast<std::size_t>(oy) * ow + ox;
        r.out[o] = src[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor pool_scatter(const Tensor& g, const std::vector<int>& argmax, const Shape& in_shape) {
  const Shape s = g.shape();
  Tensor dx(in_shape);
  const int planes = s.n * s.c;
  const std::size_t out_plane = s.plane();
  const std::size_t in_plane = in_shape.plane();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    for (std::size_t j = 0; j < out_plane; ++j) {
      const std::size_t o = static_cast<std::size_t>(p) * out_plane + j;
      dx[static_cast<std::size_t>(p) * in_plane + static_cast<std::size_t>(argmax[o])] += g[o];
    }
  }
  return dx;
}

Tensor pool_gather(const Tensor& x, const std::vector<int>& argmax, const Shape& out_shape) {
  Tensor y(out_shape);
  const int planes = out_shape.n * out_shape.c;
  const std::size_t out_plane = out_shape.plane();
  const std::size_t in_plane = x.shape().plane();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    for (std::size_t j = 0; j < out_plane; ++j) {
      const std::size_t o = static_cast<std::size_t>(p) * out_plane + j;
      y[o] = x[static_cast<std::size_t>(p) * in_plane + static_cast<std::size_t>(argmax[o])];
    }
  }
  return y;
}

}  // namespace fh::kernels
