#pragma once

#include "nimp/datasets.hpp"
#include "nimp/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nimp {

/// Hidden-layer nonlinearity. `linear` exists for gradient-check tests only.
enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, linear = 2 };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Per-neuron batch normalization applied to the pre-activation sum.
struct BatchNorm {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;

  static constexpr double kEpsilon = 1e-5;
};

/// Affine map from layer i-1 to layer i: weights are (fan_in x fan_out), so
/// weights(p, j) connects neuron p of the previous layer to neuron j.
struct DenseLayer {
  Matrix weights;
  Vector bias;
  std::optional<BatchNorm> batch_norm;
};

/// Fully-connected feed-forward classifier with a softmax output layer.
///
/// Layer indices follow the usual convention: layer 0 is the input, layers
/// 1..hidden_layers() are hidden, and the last layer holds one neuron per
/// class. `layers[i - 1]` produces layer i.
struct MlpModel {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<DenseLayer> layers;

  std::size_t hidden_layers() const { return layer_sizes.size() - 2; }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t layer_width(std::size_t layer) const { return layer_sizes.at(layer); }
  std::size_t hidden_neurons() const;
  bool has_batch_norm() const;

  /// Same layer sizes, activation and batch-norm presence.
  bool same_architecture(const MlpModel& other) const;

  /// Throws ShapeError / ArgumentError when an invariant is violated.
  void validate() const;

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpModel initialize(std::span<const std::size_t> layer_sizes, Activation activation,
                             std::uint64_t seed, bool batch_norm = false);
};

/// Replaces the output of hidden neuron (layer, neuron) by a constant.
struct NeuronOverride {
  std::size_t layer;
  std::size_t neuron;
  double value;
};

using Overrides = std::span<const NeuronOverride>;

/// Outputs t_j^{(i)} of every neuron of hidden layer `layer`, one row per sample.
struct ActivationMatrix {
  std::size_t layer = 0;
  Matrix values;
};

struct ForwardResult {
  Matrix probabilities;
  std::vector<ActivationMatrix> hidden;
};

/// Inference-mode forward pass (no dropout, batch norm from running
/// statistics). Overridden neurons emit their constant before the next layer
/// consumes them; the returned hidden activations include the substitutions.
ForwardResult forward(const MlpModel& model, const Matrix& batch, Overrides overrides = {});

/// Clean (override-free) outputs of `layer` for a batch; layer 0 is the batch itself.
Matrix layer_output(const MlpModel& model, const Matrix& batch, std::size_t layer);

/// Continues inference from the outputs of `layer`, applying every override
/// whose layer is >= `layer`. Returns softmax probabilities.
Matrix forward_from(const MlpModel& model, std::size_t layer, Matrix outputs,
                    Overrides overrides = {});

/// Index of the largest probability per row; ties go to the lowest class.
std::vector<int> argmax_rows(const Matrix& probabilities);

/// Fraction of rows whose argmax differs from the label.
double error_rate(const Matrix& probabilities, std::span<const int> labels);

/// Classification error of the model on a dataset.
double evaluate(const MlpModel& model, const Dataset& set, Overrides overrides = {});

/// Mean cross-entropy (nats) in inference mode.
double cross_entropy(const MlpModel& model, const Dataset& set);

/// One activation matrix per hidden layer over the full set, inference mode.
std::vector<ActivationMatrix> record_activations(const MlpModel& model, const Dataset& set);

/// Removes a hidden neuron and folds its constant output into the biases of
/// the next layer: b_k += w_{j,k} * value. Equivalent to the override.
MlpModel absorb_constant(const MlpModel& model, const NeuronOverride& override_);

/// Throws ArgumentError unless every override names an existing hidden neuron.
void check_overrides(const MlpModel& model, Overrides overrides);

/// Number of rows processed at once when sweeping whole datasets.
inline constexpr std::size_t kInferenceChunk = 2048;

}  // namespace nimp
