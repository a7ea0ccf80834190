#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lsm/graph.hpp"
#include "lsm/label_signals.hpp"
#include "lsm/regularizers.hpp"

namespace {

lsm::Matrix random_reps(std::size_t b, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  lsm::Matrix m(b, d);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<int> cyclic_labels(std::size_t b) {
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i % 10);
  return labels;
}

void BM_Similarity(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto reps = random_reps(b, 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(lsm::graph::build_similarity_matrix(reps));
}
BENCHMARK(BM_Similarity)->Arg(32)->Arg(100)->Arg(256);

void BM_KnnGraph(benchmark::State& state) {
  const auto sim = lsm::graph::build_similarity_matrix(random_reps(100, 64, 2));
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lsm::graph::knn_adjacency(sim, k, true));
}
BENCHMARK(BM_KnnGraph)->Arg(5)->Arg(20)->Arg(100);

void BM_Eigendecompose(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto g = lsm::graph::knn_adjacency(lsm::graph::build_similarity_matrix(random_reps(b, 32, 3)), b, true);
  for (auto _ : state) benchmark::DoNotOptimize(lsm::graph::eigendecompose(g.laplacian));
}
BENCHMARK(BM_Eigendecompose)->Arg(16)->Arg(50)->Arg(100);

void BM_Regularizer(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const std::vector<lsm::Matrix> reps{random_reps(b, 128, 4), random_reps(b, 64, 5), random_reps(b, 32, 6)};
  const auto labels = cyclic_labels(b);
  const auto signals = lsm::make_label_signals(labels, 10);
  lsm::RegularizerConfig cfg;
  cfg.power_m = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(lsm::smoothness_regularizer(reps, signals, cfg, true));
}
BENCHMARK(BM_Regularizer)->Args({32, 2})->Args({100, 2})->Args({100, 3});

void BM_ParsevalRetraction(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> w(n * n);
  std::mt19937_64 rng(7);
  std::normal_distribution<float> dist(0.0f, 1.0f / static_cast<float>(n));
  for (float& v : w) v = dist(rng);
  for (auto _ : state) {
    lsm::parseval_retraction<float>(w, n, n, 0.01);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ParsevalRetraction)->Arg(64)->Arg(144)->Arg(256);

}  // namespace
