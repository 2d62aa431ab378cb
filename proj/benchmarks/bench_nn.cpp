#include <nimp/ablation.hpp>
#include <nimp/nn.hpp>
#include <nimp/random.hpp>
#include <nimp/train.hpp>

#include <benchmark/benchmark.h>

namespace {

nimp::Matrix random_inputs(Eigen::Index rows, Eigen::Index cols) {
  nimp::Rng rng(2);
  nimp::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform();
  return m;
}

const std::vector<std::size_t> kMnistNet{784, 100, 100, 10};

void BM_Forward(benchmark::State& state) {
  const auto model = nimp::MlpModel::initialize(kMnistNet, nimp::Activation::relu, 1);
  const auto x = random_inputs(state.range(0), 784);
  for (auto _ : state) benchmark::DoNotOptimize(nimp::forward(model, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(2048)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  auto model = nimp::MlpModel::initialize(kMnistNet, nimp::Activation::relu, 1);
  const auto x = random_inputs(32, 784);
  std::vector<int> y(32);
  for (int i = 0; i < 32; ++i) y[i] = i % 10;
  nimp::TrainConfig cfg;
  nimp::RmsProp opt(model, cfg);
  for (auto _ : state) {
    const auto lg = nimp::loss_and_gradients(model, x, y);
    opt.step(model, lg.gradients);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMicrosecond);

// One ablation curve over a 100-neuron layer on 10000 test samples.
void BM_LayerAblationCurve(benchmark::State& state) {
  const auto model = nimp::MlpModel::initialize(kMnistNet, nimp::Activation::relu, 1);
  nimp::Dataset test;
  test.features = random_inputs(10000, 784).cast<float>();
  test.labels.resize(10000);
  for (int i = 0; i < 10000; ++i) test.labels[i] = i % 10;
  const auto order = nimp::scope_neurons(model.layer_sizes, nimp::AblationScope::hidden_layer(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nimp::cumulative_ablate(model, test, order, nimp::AblationStrategy::to_zero, nullptr, 1));
}
BENCHMARK(BM_LayerAblationCurve)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace
