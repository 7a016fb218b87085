// Micro benchmarks for the op kernels that dominate encoder step time.

#include <benchmark/benchmark.h>

#include <vector>

#include "smoa/ops.hpp"
#include "smoa/rng.hpp"
#include "smoa/tensor.hpp"

using namespace smoa;

namespace {

Tensor make_input(int64_t rows, int64_t cols, uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  return Tensor::randn({rows, cols}, rng, 1.0, requires_grad);
}

void bm_matmul(benchmark::State& state) {
  const int64_t m = state.range(0), k = state.range(1), n = state.range(2);
  NoGradGuard ng;
  const Tensor a = make_input(m, k, 1);
  const Tensor b = make_input(k, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).data());
  }
  state.SetItemsProcessed(state.iterations() * m * k * n);
}
BENCHMARK(bm_matmul)->Args({256, 64, 64})->Args({256, 64, 24})->Args({256, 64, 1})->Args({64, 64, 256});

void bm_softmax_rows(benchmark::State& state) {
  const int64_t m = state.range(0), n = state.range(1);
  NoGradGuard ng;
  const Tensor a = make_input(m, n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_rows(a).data());
  }
  state.SetItemsProcessed(state.iterations() * m * n);
}
BENCHMARK(bm_softmax_rows)->Args({256, 256})->Args({256, 14});

void bm_softmax_cols(benchmark::State& state) {
  const int64_t m = state.range(0), n = state.range(1);
  NoGradGuard ng;
  const Tensor a = make_input(m, n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_cols(a).data());
  }
  state.SetItemsProcessed(state.iterations() * m * n);
}
BENCHMARK(bm_softmax_cols)->Args({256, 14});

void bm_layernorm(benchmark::State& state) {
  const int64_t m = state.range(0), n = state.range(1);
  NoGradGuard ng;
  const Tensor x = make_input(m, n, 5);
  const Tensor gamma = Tensor::full({n}, 1.0);
  const Tensor beta = Tensor::zeros({n});
  for (auto _ : state) {
    benchmark::DoNotOptimize(layernorm(x, gamma, beta).data());
  }
  state.SetItemsProcessed(state.iterations() * m * n);
}
BENCHMARK(bm_layernorm)->Args({256, 64});

void bm_gelu(benchmark::State& state) {
  const int64_t m = state.range(0), n = state.range(1);
  NoGradGuard ng;
  const Tensor x = make_input(m, n, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gelu(x).data());
  }
  state.SetItemsProcessed(state.iterations() * m * n);
}
BENCHMARK(bm_gelu)->Args({256, 256})->Args({256, 24});

// Forward + backward through a small expression, measuring graph overhead.
void bm_linear_train_step(benchmark::State& state) {
  const int64_t m = state.range(0), k = state.range(1), n = state.range(2);
  Rng rng(7);
  Tensor x = Tensor::randn({m, k}, rng, 1.0);
  Tensor w = Tensor::randn({k, n}, rng, 0.1, true);
  Tensor b = Tensor::zeros({n}, true);
  const std::vector<int> labels(static_cast<size_t>(m), 0);
  for (auto _ : state) {
    w.zero_grad();
    b.zero_grad();
    Tensor loss = cross_entropy(linear(x, w, b), labels);
    backward(loss);
    benchmark::DoNotOptimize(w.grad_buffer().data());
  }
}
BENCHMARK(bm_linear_train_step)->Args({256, 64, 10});

}  // namespace

BENCHMARK_MAIN();
