#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "imia/attacks.hpp"
#include "imia/data.hpp"
#include "imia/metrics.hpp"
#include "imia/nn.hpp"

namespace {

using namespace imia;

// Desk-scale shapes: 600 features, 100 classes, hidden [256, 128].
const std::vector<int> kDims = {600, 256, 128, 100};

Dataset batch(std::size_t rows) {
  const Dataset full = gen_synthetic(std::max<std::size_t>(rows, 100), 600, 100, 0.1, 3);
  std::vector<Index> idx(rows);
  for (std::size_t i = 0; i < rows; ++i) idx[i] = static_cast<Index>(i);
  return subset(full, idx);
}

void BM_Forward(benchmark::State& state) {
  const MlpModel m = MlpModel::create(kDims, Activation::kRelu, 1);
  const Dataset d = batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, d.features));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(2500);

void BM_CrossEntropyBackward(benchmark::State& state) {
  const MlpModel m = MlpModel::create(kDims, Activation::kRelu, 1);
  const Dataset d = batch(64);
  for (auto _ : state) benchmark::DoNotOptimize(cross_entropy(m, d.features, d.labels));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_CrossEntropyBackward);

void BM_ImitationBackward(benchmark::State& state) {
  const MlpModel m = MlpModel::create(kDims, Activation::kRelu, 1);
  const MlpModel teacher = MlpModel::create(kDims, Activation::kRelu, 2);
  const Dataset d = batch(64);
  const Matrix probs = softmax_rows(forward(teacher, d.features));
  for (auto _ : state) benchmark::DoNotOptimize(imitation_loss(m, probs, d.features, d.labels));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ImitationBackward);

void BM_TrainEpoch(benchmark::State& state) {
  const Dataset d = batch(2500);
  TrainConfig tc;
  tc.epochs = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(sgd_train(MlpModel::create(kDims, Activation::kRelu, 1), d, Objective{}, tc));
  state.SetItemsProcessed(state.iterations() * 2500);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

ScoreTable random_scores(std::size_t n) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  ScoreTable t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool member = i % 2 == 0;
    t.rows.push_back({static_cast<Index>(i), z(rng) + (member ? 0.5 : 0.0), member, ""});
  }
  return t;
}

void BM_Roc(benchmark::State& state) {
  const ScoreTable t = random_scores(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(roc(t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Roc)->Arg(5000)->Arg(100000);

void BM_Wasserstein(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size() + 3);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng) + 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_1d(a, b));
}
BENCHMARK(BM_Wasserstein)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
