#include <benchmark/benchmark.h>

#include "pens/layers.hpp"
#include "pens/rng.hpp"

using namespace pens;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<Real> values(n);
  for (auto& v : values) v = static_cast<Real>(uniform(rng, -1, 1));
  return Tensor::from(std::move(shape), std::move(values));
}

void BM_LSTMStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const LSTMCell cell(300, hidden, rng);
  const auto x = random_tensor({128, 300}, rng);
  const auto s = cell.initial_state(128);
  for (auto _ : state) benchmark::DoNotOptimize(cell(x, s).h.data().data());
}
BENCHMARK(BM_LSTMStep)->Arg(64)->Arg(128);

void BM_GRUStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const GRUCell cell(300, hidden, rng);
  const auto x = random_tensor({128, 300}, rng);
  const auto s = cell.initial_state(128);
  for (auto _ : state) benchmark::DoNotOptimize(cell(x, s).h.data().data());
}
BENCHMARK(BM_GRUStep)->Arg(64)->Arg(128);

// Batch 32, 60 steps, embedding 100, hidden 64, forward and backward.
void BM_LSTMSequenceBackward(benchmark::State& state) {
  Rng rng(3);
  const LSTMCell cell(100, 64, rng);
  const auto x = random_tensor({32, 60, 100}, rng);
  const std::vector<std::size_t> lengths(32, 60);
  auto params = cell.parameters("lstm");
  for (auto _ : state) {
    sum(run_recurrent(cell, x, lengths, false)).backward();
    for (auto& [name, p] : params) p.zero_grad();
  }
}
BENCHMARK(BM_LSTMSequenceBackward)->Unit(benchmark::kMillisecond);

void BM_BidirectionalGRU(benchmark::State& state) {
  Rng rng(4);
  const auto forward_cell = std::make_shared<GRUCell>(100, 64, rng);
  const auto backward_cell = std::make_shared<GRUCell>(100, 64, rng);
  const Bidirectional bi(forward_cell, backward_cell);
  const auto x = random_tensor({32, 60, 100}, rng);
  const std::vector<std::size_t> lengths(32, 60);
  for (auto _ : state) benchmark::DoNotOptimize(bi.forward(x, lengths).data().data());
}
BENCHMARK(BM_BidirectionalGRU)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
