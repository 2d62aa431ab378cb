#pragma once

#include "nimp/datasets.hpp"
#include "nimp/nn.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace nimp {

enum class Regularizer { none, l2, dropout, dropout_batchnorm };

std::string_view to_string(Regularizer regularizer);
Regularizer parse_regularizer(std::string_view name);

struct TrainConfig {
  Regularizer regularizer = Regularizer::none;
  double weight_decay = 0.0;     ///< used when regularizer == l2
  std::vector<double> dropout;   ///< one drop probability per hidden layer
  double learning_rate = 1e-3;
  double momentum = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;      ///< epochs without validation improvement before stopping
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  std::uint64_t seed = 0;

  bool uses_dropout() const;
  bool uses_batch_norm() const { return regularizer == Regularizer::dropout_batchnorm; }
  void validate(std::size_t hidden_layers) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Gradients laid out like the model parameters. gamma/beta are empty for
/// layers without batch norm.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  std::vector<Vector> gamma;
  std::vector<Vector> beta;

  static Gradients zeros_like(const MlpModel& model);
};

/// How the loss is evaluated: batch norm from batch statistics (training) or
/// running statistics, plus optional inverted-dropout masks per hidden layer.
struct LossMode {
  bool batch_statistics = true;
  std::span<const Matrix> dropout_masks;  ///< empty: no dropout
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
  /// Per hidden layer batch mean / biased variance of the pre-activation
  /// (empty for layers without batch norm or when running statistics are used).
  std::vector<Vector> batch_mean;
  std::vector<Vector> batch_var;
};

/// Mean softmax cross-entropy (nats) of a labelled batch.
double batch_loss(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                  const LossMode& mode = {});

/// Loss and its gradient by backpropagation.
LossAndGradients loss_and_gradients(const MlpModel& model, const Matrix& batch,
                                    std::span<const int> labels, const LossMode& mode = {});

/// RMSProp with a classical momentum buffer on the normalized step:
///   v   <- decay * v + (1 - decay) * g^2
///   buf <- momentum * buf + g / (sqrt(v) + eps)
///   p   <- p - lr * buf
/// With L2 regularization, weight_decay * p is added to g first.
class RmsProp {
 public:
  RmsProp(const MlpModel& model, const TrainConfig& config);

  void step(MlpModel& model, const Gradients& data_gradients);

 private:
  TrainConfig config_;
  Gradients square_avg_;
  Gradients momentum_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  MlpModel model;               ///< parameters of the best validation epoch
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
};

/// Mini-batch training with early stopping on validation loss. Throws
/// DivergenceError when a batch loss is non-finite or exceeds
/// kDivergenceLoss.
TrainResult train(const Dataset& train_set, const Dataset& validation_set,
                  std::span<const std::size_t> architecture, Activation activation,
                  const TrainConfig& config);

inline constexpr double kDivergenceLoss = 1e3;

/// Largest relative discrepancy |a - n| / max(|a|, |n|, 1e-6) between backprop
/// gradients and five-point finite differences (step 1e-3) over every
/// parameter. For ReLU nets, parameters whose stencil flips any unit on or off
/// are skipped. Batch norm, if present, uses batch statistics; dropout is off.
double grad_check(const MlpModel& model, const Matrix& batch, std::span<const int> labels);

}  // namespace nimp
