// Adapter-path benchmarks at the headline comparison shape: 256 tokens,
// d=64, single(r=24) vs dense(N=14,r=1) vs soft(N=14,p=1,r=1).

#include <benchmark/benchmark.h>

#include "smoa/adapter.hpp"
#include "smoa/moa.hpp"
#include "smoa/registry.hpp"
#include "smoa/rng.hpp"
#include "smoa/tensor.hpp"

using namespace smoa;

namespace {

constexpr int64_t kTokens = 256;
constexpr int64_t kWidth = 64;

Tensor tokens_input(uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn({kTokens, kWidth}, rng, 1.0);
}

void bm_single_adapter(benchmark::State& state) {
  const int64_t r = state.range(0);
  NoGradGuard ng;
  ParamRegistry reg;
  const BottleneckAdapter a =
      make_adapter(kWidth, r, Activation::Gelu, "bench", 1, reg, false);
  const Tensor x = tokens_input(11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adapter_forward(a, x).data());
  }
}
BENCHMARK(bm_single_adapter)->Arg(24)->Arg(1);

void bm_dense_moa(benchmark::State& state) {
  const int64_t n = state.range(0);
  NoGradGuard ng;
  ParamRegistry reg;
  const DenseMoaLayer layer =
      make_dense_moa(kWidth, n, 1, Activation::Gelu, "bench", 2, reg, false);
  const Tensor x = tokens_input(12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense_moa_forward(layer, x).data());
  }
}
BENCHMARK(bm_dense_moa)->Arg(14)->Arg(7)->Arg(2);

void bm_soft_moa(benchmark::State& state) {
  const int64_t n = state.range(0), p = state.range(1);
  NoGradGuard ng;
  ParamRegistry reg;
  const SoftMoaLayer layer =
      make_soft_moa(kWidth, n, p, 1, Activation::Gelu, "bench", 3, reg, false);
  const Tensor x = tokens_input(13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(soft_moa_forward(layer, x).data());
  }
}
BENCHMARK(bm_soft_moa)->Args({14, 1})->Args({7, 2})->Args({2, 14});

void bm_soft_moa_traced(benchmark::State& state) {
  NoGradGuard ng;
  ParamRegistry reg;
  const SoftMoaLayer layer =
      make_soft_moa(kWidth, 14, 1, 1, Activation::Gelu, "bench", 4, reg, false);
  const Tensor x = tokens_input(14);
  for (auto _ : state) {
    RoutingTrace trace;
    benchmark::DoNotOptimize(soft_moa_forward(layer, x, &trace).data());
    benchmark::DoNotOptimize(trace.combine.v.data());
  }
}
BENCHMARK(bm_soft_moa_traced);

}  // namespace

BENCHMARK_MAIN();
