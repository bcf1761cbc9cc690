// Serial reference implementations. Deliberately naive: direct loops over the
// defining sums, no tiling, no shared helpers with the parallel kernels.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fh/kernels.hpp"

namespace fh::reference {

Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry geo) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws.c != xs.c) throw std::invalid_argument("reference conv2d channel mismatch");
  const int ho = conv_out_size(xs.h, ws.h, geo);
  const int wo = conv_out_size(xs.w, ws.w, geo);
  Tensor y(Shape{xs.n, ws.n, ho, wo});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < xs.c; ++c)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int iy = oy * geo.stride - geo.pad + ky;
                const int ix = ox * geo.stride - geo.pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
              }
          y.at(n, o, oy, ox) = acc;
        }
  return y;
}

Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, ConvGeometry geo, int in_h, int in_w) {
  const Shape gs = g.shape();
  const Shape ws = w.shape();
  Tensor dx(Shape{gs.n, ws.c, in_h, in_w});
  for (int n = 0; n < gs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int oy = 0; oy < gs.h; ++oy)
        for (int ox = 0; ox < gs.w; ++ox) {
          const double gv = g.at(n, o, oy, ox);
          for (int c = 0; c < ws.c; ++c)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int iy = oy * geo.stride - geo.pad + ky;
                const int ix = ox * geo.stride - geo.pad + kx;
                if (iy < 0 || iy >= in_h || ix < 0 || ix >= in_w) continue;
                dx.at(n, c, iy, ix) += w.at(o, c, ky, kx) * gv;
              }
        }
  return dx;
}

Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, int kh, int kw, ConvGeometry geo) {
  const Shape xs = x.shape();
  const Shape gs = g.shape();
  Tensor dw(Shape{gs.c, xs.c, kh, kw});
  for (int o = 0; o < gs.c; ++o)
    for (int c = 0; c < xs.c; ++c)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < xs.n; ++n)
            for (int oy = 0; oy < gs.h; ++oy)
              for (int ox = 0; ox < gs.w; ++ox) {
                const int iy = oy * geo.stride - geo.pad + ky;
                const int ix = ox * geo.stride - geo.pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += g.at(n, o, oy, ox) * x.at(n, c, iy, ix);
              }
          dw.at(o, c, ky, kx) = acc;
        }
  return dw;
}

namespace {

// Source coordinate of a half-pixel-centred sample, clamped to the valid range.
void source_coord(int o, int in, int out, int& i0, int& i1, double& f) {
  double s = (o + 0.5) * in / out - 0.5;
  s = std::max(s, 0.0);
  i0 = std::min(static_cast<int>(std::floor(s)), in - 1);
  i1 = std::min(i0 + 1, in - 1);
  f = s - i0;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const Shape s = x.shape();
  Tensor y(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          int y0, y1, x0, x1;
          double fy, fx;
          source_coord(oy, s.h, out_h, y0, y1, fy);
          source_coord(ox, s.w, out_w, x0, x1, fx);
          y.at(n, c, oy, ox) = (1 - fy) * (1 - fx) * x.at(n, c, y0, x0) + (1 - fy) * fx * x.at(n, c, y0, x1) +
                               fy * (1 - fx) * x.at(n, c, y1, x0) + fy * fx * x.at(n, c, y1, x1);
        }
  return y;
}

Tensor resize_bilinear_adjoint(const Tensor& g, int in_h, int in_w) {
  const Shape s = g.shape();
  Tensor dx(Shape{s.n, s.c, in_h, in_w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < s.h; ++oy)
        for (int ox = 0; ox < s.w; ++ox) {
          int y0, y1, x0, x1;
          double fy, fx;
          source_coord(oy, in_h, s.h, y0, y1, fy);
          source_coord(ox, in_w, s.w, x0, x1, fx);
          const double v = g.at(n, c, oy, ox);
          dx.at(n, c, y0, x0) += (1 - fy) * (1 - fx) * v;
          dx.at(n, c, y0, x1) += (1 - fy) * fx * v;
          dx.at(n, c, y1, x0) += fy * (1 - fx) * v;
          dx.at(n, c, y1, x1) += fy * fx * v;
        }
  return dx;
}

Tensor downsample_area(const Tensor& x, int factor) {
  const Shape s = x.shape();
  if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw std::invalid_argument("reference downsample: factor does not divide");
  }
  Tensor y(Shape{s.n, s.c, s.h / factor, s.w / factor});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int iy = 0; iy < s.h; ++iy)
        for (int ix = 0; ix < s.w; ++ix) y.at(n, c, iy / factor, ix / factor) += x.at(n, c, iy, ix);
  const double inv = 1.0 / (factor * factor);
  for (auto& v : y.storage()) v *= inv;
  return y;
}

PoolResult maxpool2x2(const Tensor& x) {
  const Shape s = x.shape();
  PoolResult r{Tensor(Shape{s.n, s.c, s.h / 2, s.w / 2}), {}};
  r.argmax.resize(r.out.size());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < s.h / 2; ++oy)
        for (int ox = 0; ox < s.w / 2; ++ox, ++o) {
          int by = 2 * oy;
          int bx = 2 * ox;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              if (x.at(n, c, 2 * oy + dy, 2 * ox + dx) > x.at(n, c, by, bx)) {
                by = 2 * oy + dy;
                bx = 2 * ox + dx;
              }
          r.out[o] = x.at(n, c, by, bx);
          r.argmax[o] = by * s.w + bx;
        }
  return r;
}

}  // namespace fh::reference
