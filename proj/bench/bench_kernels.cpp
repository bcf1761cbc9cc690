// Parallel kernels against the serial reference on layer shapes that occur in
// the default networks.

#include <benchmark/benchmark.h>

#include <random>

#include "fh/kernels.hpp"

namespace {

fh::Tensor random_tensor(fh::Shape s, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  fh::Tensor t(s);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

// args: batch, in channels, out channels, spatial, kernel, stride, pad
struct ConvCase {
  fh::Tensor x, w, g;
  fh::ConvGeometry geo;
};

ConvCase make_case(const benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const int o = static_cast<int>(state.range(2));
  const int hw = static_cast<int>(state.range(3));
  const int k = static_cast<int>(state.range(4));
  const fh::ConvGeometry geo{static_cast<int>(state.range(5)), static_cast<int>(state.range(6))};
  const int out = fh::conv_out_size(hw, k, geo);
  return {random_tensor({n, c, hw, hw}, 1), random_tensor({o, c, k, k}, 2), random_tensor({n, o, out, out}, 3), geo};
}

void set_flops(benchmark::State& state, const ConvCase& cc) {
  const double macs = static_cast<double>(cc.g.size()) * cc.w.shape().c * cc.w.shape().h * cc.w.shape().w;
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * macs, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_Conv2d(benchmark::State& state) {
  auto cc = make_case(state);
  for (auto _ : state) {
    auto y = Parallel ? fh::kernels::conv2d(cc.x, cc.w, cc.geo) : fh::reference::conv2d(cc.x, cc.w, cc.geo);
    benchmark::DoNotOptimize(y.data());
  }
  set_flops(state, cc);
}

template <bool Parallel>
void BM_Conv2dBackwardInput(benchmark::State& state) {
  auto cc = make_case(state);
  const int hw = cc.x.shape().h;
  for (auto _ : state) {
    auto y = Parallel ? fh::kernels::conv2d_backward_input(cc.g, cc.w, cc.geo, hw, hw)
                      : fh::reference::conv2d_backward_input(cc.g, cc.w, cc.geo, hw, hw);
    benchmark::DoNotOptimize(y.data());
  }
  set_flops(state, cc);
}

template <bool Parallel>
void BM_Conv2dBackwardWeight(benchmark::State& state) {
  auto cc = make_case(state);
  const int k = cc.w.shape().h;
  for (auto _ : state) {
    auto y = Parallel ? fh::kernels::conv2d_backward_weight(cc.x, cc.g, k, k, cc.geo)
                      : fh::reference::conv2d_backward_weight(cc.x, cc.g, k, k, cc.geo);
    benchmark::DoNotOptimize(y.data());
  }
  set_flops(state, cc);
}

template <bool Parallel>
void BM_ResizeBilinear(benchmark::State& state) {
  const int in = static_cast<int>(state.range(0));
  auto x = random_tensor({4, 3, in, in}, 4);
  for (auto _ : state) {
    auto y = Parallel ? fh::kernels::resize_bilinear(x, 128, 128) : fh::reference::resize_bilinear(x, 128, 128);
    benchmark::DoNotOptimize(y.data());
  }
}

// residual 3x3 at 64x64, stride-2 4x4 encoder/critic layer, 5x5 RGB block at 128x128
#define CONV_SHAPES                                  \
  ->Args({4, 16, 16, 64, 3, 1, 1})                   \
      ->Args({4, 16, 32, 64, 4, 2, 1})               \
      ->Args({4, 8, 3, 128, 5, 1, 2})                \
      ->Unit(benchmark::kMillisecond)

BENCHMARK(BM_Conv2d<false>) CONV_SHAPES;
BENCHMARK(BM_Conv2d<true>) CONV_SHAPES;
BENCHMARK(BM_Conv2dBackwardInput<false>) CONV_SHAPES;
BENCHMARK(BM_Conv2dBackwardInput<true>) CONV_SHAPES;
BENCHMARK(BM_Conv2dBackwardWeight<false>) CONV_SHAPES;
BENCHMARK(BM_Conv2dBackwardWeight<true>) CONV_SHAPES;
BENCHMARK(BM_ResizeBilinear<false>)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResizeBilinear<true>)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
