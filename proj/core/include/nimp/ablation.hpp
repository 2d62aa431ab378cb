#pragma once

#include "nimp/datasets.hpp"
#include "nimp/infotheory.hpp"
#include "nimp/nn.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nimp {

enum class AblationStrategy { to_zero, to_mean };
enum class RankDirection { lowest_first, highest_first };

std::string_view to_string(AblationStrategy strategy);
std::string_view to_string(RankDirection direction);
AblationStrategy parse_strategy(std::string_view name);
RankDirection parse_direction(std::string_view name);

/// Either every hidden neuron of the network or the neurons of one hidden layer.
struct AblationScope {
  std::optional<std::size_t> layer;  ///< nullopt: whole network

  static AblationScope whole_network() { return {}; }
  static AblationScope hidden_layer(std::size_t i) { return {i}; }
  bool is_whole_network() const { return !layer.has_value(); }
  friend bool operator==(const AblationScope&, const AblationScope&) = default;
};

/// Rank by a named measure, or (measure == nullopt) uniformly at random.
struct Ranking {
  std::optional<std::string> measure;
  RankDirection direction = RankDirection::lowest_first;
  std::uint64_t seed = 0;  ///< random ranking only

  bool is_random() const { return !measure.has_value(); }
  friend bool operator==(const Ranking&, const Ranking&) = default;
};

struct AblationPlan {
  AblationScope scope;
  Ranking ranking;
  AblationStrategy strategy = AblationStrategy::to_zero;
  std::optional<std::size_t> step;  ///< nullopt: default_step()

  /// File-name friendly identifier, e.g. "layer1_mi_highest_first_to_zero".
  std::string label() const;
  friend bool operator==(const AblationPlan&, const AblationPlan&) = default;
};

struct NeuronRef {
  std::size_t layer;
  std::size_t neuron;
  friend auto operator<=>(const NeuronRef&, const NeuronRef&) = default;
};

struct CurvePoint {
  std::size_t k = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
};

struct AblationCurve {
  std::vector<CurvePoint> points;
  std::size_t replicates = 1;
  AblationPlan plan;

  /// Point with exactly k ablated neurons; throws ArgumentError if absent.
  const CurvePoint& at(std::size_t k) const;
};

/// measures[i - 1][j] holds the measures of neuron j in hidden layer i.
using LayerMeasures = std::vector<std::vector<NeuronMeasures>>;

/// Mean training-set output of every hidden neuron; per_layer[i - 1][j].
struct NeuronMean {
  std::vector<Vector> per_layer;
};

/// Names accepted by Ranking::measure.
std::span<const std::string_view> measure_names();

/// Looks up a measure by name; throws ArgumentError for unknown names or for
/// "js" when the subset separation was not computed.
double measure_value(const NeuronMeasures& m, std::string_view name);

/// Neurons in scope, ordered by (layer, neuron). Throws ArgumentError if the
/// scope names a layer that is not hidden.
std::vector<NeuronRef> scope_neurons(std::span<const std::size_t> layer_sizes, const AblationScope& scope);

/// Total order of the neurons in the plan's scope. Ties keep (layer, neuron)
/// order; random ranking is a seeded shuffle of that list.
std::vector<NeuronRef> rank_neurons(const LayerMeasures& measures, const AblationPlan& plan);

/// 1 for scopes whose layers have at most 100 neurons, else 5.
std::size_t default_step(std::span<const std::size_t> layer_sizes, const AblationScope& scope);

/// Test error after ablating the first k neurons of `order`, for
/// k = 0, step, 2*step, ... and always the full length.
AblationCurve cumulative_ablate(const MlpModel& model, const Dataset& test,
                                std::span<const NeuronRef> order, AblationStrategy strategy,
                                const NeuronMean* means, std::size_t step);

struct ExperimentCurves {
  AblationCurve aggregate;                ///< per-k mean and population std
  std::vector<AblationCurve> replicates;  ///< one curve per model
};

/// Runs the plan for every replicate (each ranked by its own measures; random
/// plans draw an independent order per replicate) and aggregates per k.
/// `means` must be given for to_mean plans, one entry per replicate.
ExperimentCurves run_experiment(std::span<const MlpModel> models, const Dataset& test,
                                const AblationPlan& plan, std::span<const LayerMeasures> measures,
                                std::span<const NeuronMean> means = {});

/// Per-neuron mean of inference-mode activations over a dataset.
NeuronMean compute_means(const MlpModel& model, const Dataset& train);

}  // namespace nimp
