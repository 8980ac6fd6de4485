#include <benchmark/benchmark.h>

#include "pens/rng.hpp"
#include "pens/tensor.hpp"

using namespace pens;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<Real> values(n);
  for (auto& v : values) v = static_cast<Real>(uniform(rng, -1, 1));
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_tensor({n, n}, rng);
  const auto b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  auto a = random_tensor({n, n}, rng, true);
  auto b = random_tensor({n, n}, rng, true);
  for (auto _ : state) {
    sum(matmul(a, b)).backward();
    a.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

// Batch 128, sequence 60, embedding 300, 128 filters of width 5.
void BM_Conv1DForward(benchmark::State& state) {
  Rng rng(3);
  const auto x = random_tensor({128, 60, 300}, rng);
  const auto k = random_tensor({5, 300, 128}, rng);
  const auto b = random_tensor({128}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, k, b).data().data());
}
BENCHMARK(BM_Conv1DForward)->Unit(benchmark::kMillisecond);

void BM_Conv1DBackward(benchmark::State& state) {
  Rng rng(4);
  const auto x = random_tensor({32, 60, 300}, rng);
  auto k = random_tensor({5, 300, 128}, rng, true);
  auto b = random_tensor({128}, rng, true);
  for (auto _ : state) {
    sum(conv1d(x, k, b)).backward();
    k.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv1DBackward)->Unit(benchmark::kMillisecond);

void BM_SoftmaxCrossEntropy(benchmark::State& state) {
  Rng rng(5);
  auto logits = random_tensor({128, 659}, rng, true);
  auto targets = Tensor::zeros({128, 659});
  for (std::size_t r = 0; r < 128; ++r) targets.data()[r * 659 + uniform_index(rng, 659)] = 1;
  for (auto _ : state) {
    cross_entropy(softmax(logits, 1), targets).backward();
    logits.zero_grad();
  }
}
BENCHMARK(BM_SoftmaxCrossEntropy);

}  // namespace

BENCHMARK_MAIN();
