#include <benchmark/benchmark.h>

#include "pens/embeddings.hpp"
#include "pens/rng.hpp"

using namespace pens;

namespace {

std::vector<Tokens> random_corpus(std::size_t docs, std::size_t length, std::size_t vocabulary) {
  Rng rng(1);
  std::vector<Tokens> out(docs);
  for (auto& doc : out) {
    for (std::size_t i = 0; i < length; ++i) doc.push_back("w" + std::to_string(uniform_index(rng, vocabulary)));
  }
  return out;
}

void BM_SkipGramEpoch(benchmark::State& state) {
  const auto corpus = random_corpus(200, 100, 2000);
  SkipGramConfig config;
  config.dim = static_cast<std::size_t>(state.range(0));
  config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_skipgram(corpus, config).epoch_loss);
  state.SetItemsProcessed(state.iterations() * 200 * 100);
}
BENCHMARK(BM_SkipGramEpoch)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_ParseWordVectors(benchmark::State& state) {
  Rng rng(2);
  std::string text;
  for (int w = 0; w < 2000; ++w) {
    text += "w" + std::to_string(w);
    for (int d = 0; d < 100; ++d) text += " " + std::to_string(uniform(rng, -1, 1));
    text += "\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(parse_word_vectors(text).size());
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseWordVectors)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
