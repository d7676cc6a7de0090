#include <benchmark/benchmark.h>

#include "celt/tensor.hpp"

using namespace celt;

namespace {

Tensor32 random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor32::from({rows, cols}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(n, n, rng);
  const auto b = random_matrix(n, n, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  auto a = random_matrix(n, n, rng).clone(true);
  auto b = random_matrix(n, n, rng).clone(true);
  for (auto _ : state) {
    backward(sum(matmul(a, b)));
    a.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->RangeMultiplier(2)->Range(16, 128);

void BM_SoftmaxRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto x = random_matrix(n, n, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, 1));
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(128);

}  // namespace
