// Serial reference kernels against the OpenMP kernels on zoo-sized layers.
// Set OMP_NUM_THREADS (or NAA_THREADS) to control the parallel variant.

#include <benchmark/benchmark.h>

#include <vector>

#include "naa/harness.hpp"
#include "naa/kernels.hpp"
#include "naa/rng.hpp"

namespace {

using naa::kernels::ConvGeometry;
using naa::kernels::DenseGeometry;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  naa::Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// A 3x3 conv on a 32x32 map; range(0) in/out channels.
ConvGeometry conv_geometry(const benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  return {c, 32, 32, c, 3, 3, 1, 1};
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = conv_geometry(state);
  const auto in = random_vec(g.in_channels * 32 * 32, 1), w = random_vec(g.out_channels * g.in_channels * 9, 2),
             b = random_vec(g.out_channels, 3);
  std::vector<float> out(g.out_channels * g.out_h() * g.out_w());
  for (auto _ : state) {
    if constexpr (Parallel) {
      naa::kernels::parallel::conv2d_forward<float>(g, in, w, b, out);
    } else {
      naa::kernels::serial::conv2d_forward<float>(g, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size() * g.in_channels * 9));
}

template <bool Parallel>
void BM_ConvBackwardInput(benchmark::State& state) {
  const ConvGeometry g = conv_geometry(state);
  const auto gout = random_vec(g.out_channels * g.out_h() * g.out_w(), 4),
             w = random_vec(g.out_channels * g.in_channels * 9, 5);
  std::vector<float> gin(g.in_channels * 32 * 32);
  for (auto _ : state) {
    if constexpr (Parallel) {
      naa::kernels::parallel::conv2d_backward_input<float>(g, gout, w, gin);
    } else {
      naa::kernels::serial::conv2d_backward_input<float>(g, gout, w, gin);
    }
    benchmark::DoNotOptimize(gin.data());
  }
}

template <bool Parallel>
void BM_DenseForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseGeometry g{n, 256};
  const auto in = random_vec(n, 6), w = random_vec(n * 256, 7), b = random_vec(256, 8);
  std::vector<float> out(256);
  for (auto _ : state) {
    if constexpr (Parallel) {
      naa::kernels::parallel::dense_forward<float>(g, in, w, b, out);
    } else {
      naa::kernels::serial::dense_forward<float>(g, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_DenseBackwardInput(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseGeometry g{n, 256};
  const auto gout = random_vec(256, 9), w = random_vec(n * 256, 10);
  std::vector<float> gin(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      naa::kernels::parallel::dense_backward_input<float>(g, gout, w, gin);
    } else {
      naa::kernels::serial::dense_backward_input<float>(g, gout, w, gin);
    }
    benchmark::DoNotOptimize(gin.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Arg(16)->Arg(32)->UseRealTime();
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/parallel")->Arg(16)->Arg(32)->UseRealTime();
BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/parallel")->Arg(1024)->Arg(4096)->UseRealTime();
BENCHMARK(BM_DenseBackwardInput<false>)->Name("dense_backward_input/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_DenseBackwardInput<true>)->Name("dense_backward_input/parallel")->Arg(1024)->Arg(4096)->UseRealTime();

int main(int argc, char** argv) {
  naa::apply_thread_limit();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
