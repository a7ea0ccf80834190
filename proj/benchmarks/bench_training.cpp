#include <vector>

#include <benchmark/benchmark.h>

#include "lsm/data_io.hpp"
#include "lsm/network.hpp"
#include "lsm/regularizers.hpp"
#include "lsm/training.hpp"

namespace {

struct Fixture {
  lsm::TrainConfig config;
  lsm::PreparedData data;
  lsm::NetworkModel<float> model;
  lsm::DenseTensor<float> batch;
  std::vector<int> labels;

  Fixture() {
    config.dataset.train_subset = 200;
    config.dataset.test_subset = 100;
    data = lsm::load_data(config);
    model = lsm::make_model<float>(config.model_spec(data.train.example_shape()), 1);
    batch = data.train.batch(0, config.batch_size);
    labels.assign(data.train.labels.begin(), data.train.labels.begin() + static_cast<std::ptrdiff_t>(config.batch_size));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Forward(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(lsm::forward_with_trace(f.model, f.batch));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    const auto trace = lsm::forward_with_trace(f.model, f.batch);
    const auto ce = lsm::softmax_cross_entropy(trace.logits(), f.labels);
    benchmark::DoNotOptimize(lsm::backward(f.model, trace, ce.grad));
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_RegularizedStep(benchmark::State& state) {
  const auto& f = fixture();
  const auto signals = lsm::make_label_signals(f.labels, f.config.num_classes);
  for (auto _ : state) {
    const auto trace = lsm::forward_with_trace(f.model, f.batch);
    const auto ce = lsm::softmax_cross_entropy(trace.logits(), f.labels);
    const auto reg = lsm::smoothness_regularizer(trace, signals, f.config.regularizer);
    benchmark::DoNotOptimize(lsm::backward(f.model, trace, ce.grad, reg.grads));
  }
}
BENCHMARK(BM_RegularizedStep)->Unit(benchmark::kMillisecond);

}  // namespace
