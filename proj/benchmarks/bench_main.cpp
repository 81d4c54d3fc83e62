// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "gprompt/adapter.hpp"
#include "gprompt/eval.hpp"
#include "gprompt/features.hpp"
#include "gprompt/synthetic.hpp"

using namespace gprompt;

namespace {

const SynthResult& synth() {
  static const SynthResult s = generate(SynthConfig{});
  return s;
}

void BM_LossAndGrads(benchmark::State& state) {
  const Bundle& b = synth().bundle;
  const LmHead head = LmHead::from_bundle(b);
  const TrainingSet data = TrainingSet::from_bundle(b);
  std::mt19937_64 rng(1);
  const GraphAdapter adapter(init_adapter(AdapterConfig{}, data.embeddings.cols(), b.hidden_dim(), rng),
                             AdapterConfig{});
  std::vector<PairSample> batch;
  for (std::size_t r = 0; batch.size() < static_cast<std::size_t>(state.range(0)); ++r) {
    batch.push_back({r % data.size(), data.nodes[r % data.size()], 1.0});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grads(adapter, head, data, batch, 1).loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrads)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_FeatureMatrix(benchmark::State& state) {
  const Bundle& b = synth().bundle;
  const LmHead head = LmHead::from_bundle(b);
  const Matrix z = widen(b.embeddings);
  std::mt19937_64 rng(2);
  const AdapterConfig cfg;
  const GraphAdapter adapter(init_adapter(cfg, z.cols(), b.hidden_dim(), rng), cfg);
  const Graph g = training_graph(b, cfg, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_feature_matrix({adapter, head, z, g}, b, 0, 1));
  }
}
BENCHMARK(BM_FeatureMatrix)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    labels[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
