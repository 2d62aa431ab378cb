#include <nimp/experiment.hpp>
#include <nimp/infotheory.hpp>
#include <nimp/quantize.hpp>
#include <nimp/random.hpp>

#include <benchmark/benchmark.h>

namespace {

struct Samples {
  std::vector<double> values;
  std::vector<int> labels;
};

Samples make_samples(std::size_t n) {
  nimp::Rng rng(1);
  Samples s{std::vector<double>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.labels[i] = static_cast<int>(rng.below(10));
    s.values[i] = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 2.0);
  }
  return s;
}

// Quantize + histogram + all measures except the subset search: the
// per-neuron cost, linear in the sample count.
void BM_NeuronPipeline(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto s = make_samples(n);
  const nimp::QuantizerSpec spec{4, nimp::Activation::relu, {}};
  for (auto _ : state) {
    const auto q = nimp::quantize(s.values, spec, 2.0);
    const auto h = nimp::build_joint(q, s.labels, 4, 10);
    benchmark::DoNotOptimize(nimp::measure_all(h, false));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NeuronPipeline)->RangeMultiplier(10)->Range(10'000, 1'000'000)->Unit(benchmark::kMicrosecond);

void BM_MeasureAll(benchmark::State& state) {
  const auto h = nimp::random_histogram(3, static_cast<std::size_t>(state.range(0)), 10);
  const bool js = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(nimp::measure_all(h, js));
}
BENCHMARK(BM_MeasureAll)->ArgsProduct({{2, 4, 8}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_SubsetSeparation(benchmark::State& state) {
  nimp::JointHistogram h(2, static_cast<std::size_t>(state.range(0)));
  nimp::Rng rng(4);
  for (std::size_t c = 0; c < h.classes(); ++c) {
    h.add(0, c, 1 + rng.below(100));
    h.add(1, c, 1 + rng.below(100));
  }
  for (auto _ : state) benchmark::DoNotOptimize(nimp::js_subset_separation(h));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SubsetSeparation)->DenseRange(6, 16, 2)->Unit(benchmark::kMicrosecond);

void BM_LemmaOracles(benchmark::State& state) {
  const auto h = nimp::random_histogram(5, 4, 10);
  for (auto _ : state) benchmark::DoNotOptimize(nimp::lemma_oracles(h));
}
BENCHMARK(BM_LemmaOracles)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
