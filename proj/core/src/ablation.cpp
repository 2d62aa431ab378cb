#include "nimp/ablation.hpp"

#include "nimp/error.hpp"
#include "nimp/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace nimp {
namespace {

constexpr std::array<std::string_view, 5> kMeasureNames = {"entropy", "mi", "kl_selectivity", "js",
                                                           "labeled_mi"};

}  // namespace

std::string_view to_string(AblationStrategy strategy) {
  return strategy == AblationStrategy::to_zero ? "to_zero" : "to_mean";
}

std::string_view to_string(RankDirection direction) {
  return direction == RankDirection::lowest_first ? "lowest_first" : "highest_first";
}

AblationStrategy parse_strategy(std::string_view name) {
  if (name == "to_zero") return AblationStrategy::to_zero;
  if (name == "to_mean") return AblationStrategy::to_mean;
  throw ArgumentError("unknown ablation strategy '" + std::string(name) + "'");
}

RankDirection parse_direction(std::string_view name) {
  if (name == "lowest_first") return RankDirection::lowest_first;
  if (name == "highest_first") return RankDirection::highest_first;
  throw ArgumentError("unknown ranking direction '" + std::string(name) + "'");
}

std::string AblationPlan::label() const {
  std::string out = scope.is_whole_network() ? "network" : "layer" + std::to_string(*scope.layer);
  if (ranking.is_random()) {
    out += "_random";
  } else {
    out += "_" + *ranking.measure + "_" + std::string(to_string(ranking.direction));
  }
  out += "_" + std::string(to_string(strategy));
  return out;
}

const CurvePoint& AblationCurve::at(std::size_t k) const {
  for (const auto& p : points)
    if (p.k == k) return p;
  throw ArgumentError("curve has no point at k = " + std::to_string(k));
}

std::span<const std::string_view> measure_names() { return kMeasureNames; }

double measure_value(const NeuronMeasures& m, std::string_view name) {
  if (name == "entropy") return m.entropy;
  if (name == "mi") return m.mutual_information;
  if (name == "kl_selectivity") return m.kl_selectivity;
  if (name == "labeled_mi") return m.labeled_mi;
  if (name == "js") {
    if (!m.js_separation) throw ArgumentError("JS subset separation was not computed");
    return *m.js_separation;
  }
  throw ArgumentError("unknown measure '" + std::string(name) + "'");
}

std::vector<NeuronRef> scope_neurons(std::span<const std::size_t> layer_sizes, const AblationScope& scope) {
  if (layer_sizes.size() < 2) throw ArgumentError("model has no layers");
  const std::size_t hidden = layer_sizes.size() - 2;
  std::size_t first = 1, last = hidden;
  if (scope.layer) {
    if (*scope.layer == 0 || *scope.layer > hidden)
      throw ArgumentError("layer " + std::to_string(*scope.layer) + " is not a hidden layer (1.." +
                          std::to_string(hidden) + ")");
    first = last = *scope.layer;
  }
  std::vector<NeuronRef> out;
  for (std::size_t i = first; i <= last; ++i)
    for (std::size_t j = 0; j < layer_sizes[i]; ++j) out.push_back({i, j});
  return out;
}

std::vector<NeuronRef> rank_neurons(const LayerMeasures& measures, const AblationPlan& plan) {
  std::vector<std::size_t> sizes{0};
  for (const auto& layer : measures) sizes.push_back(layer.size());
  sizes.push_back(0);
  auto order = scope_neurons(sizes, plan.scope);

  if (plan.ranking.is_random()) {
    Rng rng(plan.ranking.seed);
    rng.shuffle(std::span<NeuronRef>(order));
    return order;
  }

  const std::string& name = *plan.ranking.measure;
  std::vector<std::pair<double, NeuronRef>> keyed;
  keyed.reserve(order.size());
  for (const auto& ref : order) keyed.emplace_back(measure_value(measures[ref.layer - 1][ref.neuron], name), ref);
  const bool ascending = plan.ranking.direction == RankDirection::lowest_first;
  std::stable_sort(keyed.begin(), keyed.end(), [ascending](const auto& a, const auto& b) {
    return ascending ? a.first < b.first : a.first > b.first;
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) order[i] = keyed[i].second;
  return order;
}

std::size_t default_step(std::span<const std::size_t> layer_sizes, const AblationScope& scope) {
  std::size_t widest = 0;
  for (const auto& ref : scope_neurons(layer_sizes, scope)) widest = std::max(widest, layer_sizes[ref.layer]);
  return widest <= 100 ? 1 : 5;
}

AblationCurve cumulative_ablate(const MlpModel& model, const Dataset& test,
                                std::span<const NeuronRef> order, AblationStrategy strategy,
                                const NeuronMean* means, std::size_t step) {
  if (step == 0) throw ArgumentError("ablation step must be at least 1");
  if (strategy == AblationStrategy::to_mean && means == nullptr)
    throw ArgumentError("ablation to the mean needs training-set means");
  if (test.dimension() != model.input_size()) throw ShapeError("test set does not match the model input");

  std::vector<NeuronOverride> overrides;
  overrides.reserve(order.size());
  std::size_t start = model.hidden_layers();
  for (const auto& ref : order) {
    double value = 0.0;
    if (strategy == AblationStrategy::to_mean) {
      if (means->per_layer.size() != model.hidden_layers() ||
          static_cast<std::size_t>(means->per_layer[ref.layer - 1].size()) != model.layer_sizes[ref.layer])
        throw ShapeError("neuron means do not match the model");
      value = means->per_layer[ref.layer - 1](static_cast<Eigen::Index>(ref.neuron));
    }
    overrides.push_back({ref.layer, ref.neuron, value});
    start = std::min(start, ref.layer);
  }
  check_overrides(model, overrides);

  // Layers below the first ablated one never change; propagate them once.
  std::vector<Matrix> cached;
  for (std::size_t begin = 0; begin < test.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, test.size() - begin);
    cached.push_back(layer_output(model, test.rows(begin, count), start));
  }
  auto error_at = [&](std::size_t k) {
    const Overrides active(overrides.data(), k);
    std::size_t wrong = 0;
    std::size_t begin = 0;
    for (const auto& chunk : cached) {
      const auto predicted = argmax_rows(forward_from(model, start, chunk, active));
      for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != test.labels[begin + i];
      begin += predicted.size();
    }
    return test.size() == 0 ? 0.0 : double(wrong) / double(test.size());
  };

  AblationCurve curve;
  curve.replicates = 1;
  for (std::size_t k = 0; k < order.size(); k += step) curve.points.push_back({k, error_at(k), 0.0});
  curve.points.push_back({order.size(), error_at(order.size()), 0.0});
  return curve;
}

ExperimentCurves run_experiment(std::span<const MlpModel> models, const Dataset& test,
                                const AblationPlan& plan, std::span<const LayerMeasures> measures,
                                std::span<const NeuronMean> means) {
  if (models.empty()) throw ArgumentError("need at least one replicate");
  if (!plan.ranking.is_random() && measures.size() != models.size())
    throw ConsistencyError("need one measure table per replicate");
  if (plan.strategy == AblationStrategy::to_mean && means.size() != models.size())
    throw ConsistencyError("ablation to the mean needs means for every replicate");
  for (const auto& m : models)
    if (!m.same_architecture(models.front()))
      throw ConsistencyError("replicates have different architectures");

  const auto& sizes = models.front().layer_sizes;
  const std::size_t step = plan.step.value_or(default_step(sizes, plan.scope));

  ExperimentCurves out;
  for (std::size_t r = 0; r < models.size(); ++r) {
    AblationPlan replicate_plan = plan;
    std::vector<NeuronRef> order;
    if (plan.ranking.is_random()) {
      replicate_plan.ranking.seed = derive_seed(plan.ranking.seed, "random_ablation", r);
      order = scope_neurons(sizes, plan.scope);
      Rng rng(replicate_plan.ranking.seed);
      rng.shuffle(std::span<NeuronRef>(order));
    } else {
      if (measures[r].size() != models[r].hidden_layers())
        throw ConsistencyError("measure table does not match the replicate architecture");
      order = rank_neurons(measures[r], plan);
    }
    auto curve = cumulative_ablate(models[r], test, order, plan.strategy,
                                   means.empty() ? nullptr : &means[r], step);
    curve.plan = replicate_plan;
    out.replicates.push_back(std::move(curve));
  }

  out.aggregate.plan = plan;
  out.aggregate.replicates = models.size();
  const auto& grid = out.replicates.front().points;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double sum = 0.0;
    for (const auto& c : out.replicates) sum += c.points[p].mean_error;
    const double mean = sum / double(models.size());
    double var = 0.0;
    for (const auto& c : out.replicates) var += (c.points[p].mean_error - mean) * (c.points[p].mean_error - mean);
    out.aggregate.points.push_back({grid[p].k, mean, std::sqrt(var / double(models.size()))});
  }
  return out;
}

NeuronMean compute_means(const MlpModel& model, const Dataset& train) {
  if (train.dimension() != model.input_size()) throw ShapeError("dataset does not match the model input");
  NeuronMean out;
  for (std::size_t i = 1; i <= model.hidden_layers(); ++i)
    out.per_layer.push_back(Vector::Zero(static_cast<Eigen::Index>(model.layer_sizes[i])));
  for (std::size_t begin = 0; begin < train.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, train.size() - begin);
    const auto result = forward(model, train.rows(begin, count));
    for (std::size_t i = 0; i < out.per_layer.size(); ++i)
      out.per_layer[i] += result.hidden[i].values.colwise().sum().transpose();
  }
  if (train.size() > 0)
    for (auto& v : out.per_layer) v /= double(train.size());
  return out;
}

}  // namespace nimp
