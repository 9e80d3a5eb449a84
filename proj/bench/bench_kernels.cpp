// OpenMP kernels against their serial references, on the shapes the GLYNN
// encoder and the tagger actually run.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "glyphner/kernels.hpp"

namespace k = glyphner::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Args: batch, spatial size, in channels, out channels.
k::Conv2dGeometry geometry(const benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  const auto hw = static_cast<std::size_t>(s.range(1));
  return k::conv2d_geometry(n, hw, hw, static_cast<std::size_t>(s.range(2)), 3,
                            static_cast<std::size_t>(s.range(3)), 1, 1, k::Padding::kSame);
}

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto in = noise(g.input_size(), 1), w = noise(g.kernel_size(), 2), b = noise(g.out_c, 3);
  std::vector<double> out(g.output_size());
  for (auto _ : state) {
    if constexpr (Parallel) k::conv2d_forward(g, in, w, b, out);
    else k::reference::conv2d_forward(g, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.output_size() * g.kernel * g.kernel * g.in_c));
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto in = noise(g.input_size(), 1), w = noise(g.kernel_size(), 2), go = noise(g.output_size(), 3);
  std::vector<double> gi(g.input_size()), gw(g.kernel_size()), gb(g.out_c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_input(g, go, w, gi);
      k::conv2d_backward_kernel(g, in, go, gw, gb);
    } else {
      k::reference::conv2d_backward_input(g, go, w, gi);
      k::reference::conv2d_backward_kernel(g, in, go, gw, gb);
    }
    benchmark::DoNotOptimize(gi.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

// Args: m, k, n.
template <bool Parallel>
void matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = noise(m * kk, 1), b = noise(kk * n, 2);
  std::vector<double> out(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::matmul(m, kk, n, a, b, out);
    else k::reference::matmul(m, kk, n, a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * kk * n));
}

void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({8, 64, 1, 32})->Args({8, 32, 32, 32})->Args({8, 16, 32, 32});
}
void matmul_shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 512, 1024})->Args({32, 1024, 256})->Args({256, 256, 256});
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_forward<true>)->Name("conv_forward/openmp")->Apply(conv_shapes)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Apply(conv_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<true>)->Name("conv_backward/openmp")->Apply(conv_shapes)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(matmul<false>)->Name("matmul/serial")->Apply(matmul_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(matmul<true>)->Name("matmul/openmp")->Apply(matmul_shapes)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
