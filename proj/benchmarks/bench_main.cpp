#include <benchmark/benchmark.h>

#include <numeric>

#include "proofgrade/embeddings.hpp"
#include "proofgrade/grader.hpp"
#include "proofgrade/mathtext.hpp"
#include "proofgrade/prng.hpp"
#include "proofgrade/studystats.hpp"
#include "proofgrade/synthetic.hpp"

using namespace proofgrade;

namespace {

std::string sample_proof() {
  SyntheticCorpusSpec spec;
  spec.records = 1;
  spec.filler_words = 200;
  return synthetic_corpus(spec).front().body_markdown;
}

FeatureMatrix random_features(std::size_t rows, std::size_t dim, std::vector<std::uint8_t>& y) {
  PortableRng rng(1);
  FeatureMatrix x(rows, dim);
  y.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    y[i] = static_cast<std::uint8_t>(rng.bounded(2));
    for (std::size_t j = 0; j < dim; ++j) x.row(i)[j] = rng.normal();
  }
  return x;
}

void BM_MergeMathTokens(benchmark::State& state) {
  const std::string text = normalize(sample_proof());
  for (auto _ : state) benchmark::DoNotOptimize(merge_math_tokens(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_MergeMathTokens);

void BM_HashEmbed(benchmark::State& state) {
  const std::string text = sample_proof();
  for (auto _ : state)
    benchmark::DoNotOptimize(hash_embed(text, static_cast<std::size_t>(state.range(0)), 0));
}
BENCHMARK(BM_HashEmbed)->Arg(256)->Arg(4096);

void BM_TrainingEpoch(benchmark::State& state) {
  std::vector<std::uint8_t> y;
  const auto x = random_features(700, static_cast<std::size_t>(state.range(0)), y);
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train_rubric_model(x, y, cfg, 1));
  state.SetItemsProcessed(state.iterations() * 700);
}
BENCHMARK(BM_TrainingEpoch)->Arg(256)->Arg(768)->Arg(4096);

void BM_Predict(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  LinearRubricModel m;
  m.params = SoftmaxParams::zeros(dim);
  std::vector<double> x(dim, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, x));
}
BENCHMARK(BM_Predict)->Arg(768)->Arg(8192);

void BM_KruskalWallis(benchmark::State& state) {
  PortableRng rng(2);
  std::vector<std::vector<double>> groups(3);
  for (auto& g : groups) {
    g.resize(static_cast<std::size_t>(state.range(0)));
    for (auto& v : g) v = 100.0 * static_cast<double>(rng.bounded(8)) / 7.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_wallis(groups));
}
BENCHMARK(BM_KruskalWallis)->Arg(30)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
