#include "nimp/train.hpp"

#include "nimp/error.hpp"
#include "nimp/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

namespace nimp {
namespace {

struct LayerTape {
  Matrix input;    // a_{i-1}
  Matrix zhat;     // normalized pre-activation (batch norm only)
  RowVector inv_std;
  RowVector batch_mean;
  RowVector batch_var;
  Matrix pre;      // argument of the nonlinearity
  Matrix output;   // sigma(pre), before dropout
};

struct Tape {
  std::vector<LayerTape> hidden;
  Matrix last_input;
  Matrix probabilities;
  double loss = 0.0;
};

void nonlinearity(Matrix& m, Activation activation) {
  switch (activation) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::sigmoid: m = (1.0 + (-m.array()).exp()).inverse().matrix(); break;
    case Activation::linear: break;
  }
}

Tape run_forward(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                 const LossMode& mode) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_size())
    throw ShapeError("batch width does not match the model input");
  if (static_cast<std::size_t>(batch.rows()) != labels.size())
    throw ShapeError("batch rows and labels differ");
  if (!mode.dropout_masks.empty() && mode.dropout_masks.size() != model.hidden_layers())
    throw ShapeError("need one dropout mask per hidden layer");

  Tape tape;
  Matrix a = batch;
  const double n = double(batch.rows());
  for (std::size_t i = 1; i <= model.hidden_layers(); ++i) {
    const auto& layer = model.layers[i - 1];
    LayerTape t;
    t.input = a;
    Matrix z = a * layer.weights;
    z.rowwise() += layer.bias.transpose();
    if (layer.batch_norm) {
      const auto& bn = *layer.batch_norm;
      RowVector mean, var;
      if (mode.batch_statistics) {
        mean = z.colwise().mean();
        var = (z.rowwise() - mean).array().square().colwise().sum().matrix() / n;
      } else {
        mean = bn.running_mean.transpose();
        var = bn.running_var.transpose();
      }
      t.inv_std = (var.array() + BatchNorm::kEpsilon).rsqrt().matrix();
      t.batch_mean = mean;
      t.batch_var = var;
      t.zhat = (z.rowwise() - mean).array().rowwise() * t.inv_std.array();
      t.pre = t.zhat.array().rowwise() * bn.gamma.transpose().array();
      t.pre.rowwise() += bn.beta.transpose();
    } else {
      t.pre = std::move(z);
    }
    t.output = t.pre;
    nonlinearity(t.output, model.activation);
    a = mode.dropout_masks.empty() ? t.output : t.output.cwiseProduct(mode.dropout_masks[i - 1]);
    tape.hidden.push_back(std::move(t));
  }
  tape.last_input = a;
  Matrix logits = a * model.layers.back().weights;
  logits.rowwise() += model.layers.back().bias.transpose();
  tape.probabilities.resize(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const double log_sum = std::log((logits.row(r).array() - top).exp().sum()) + top;
    tape.probabilities.row(r) = (logits.row(r).array() - log_sum).exp().matrix();
    loss += log_sum - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  tape.loss = loss / n;
  return tape;
}

// Visits every parameter block of a model together with the matching
// block of one or more gradient-shaped buffers.
template <typename Fn>
void for_each_block(MlpModel& model, Fn&& fn) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    fn(l, 0, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    fn(l, 1, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    if (layer.batch_norm) {
      fn(l, 2, layer.batch_norm->gamma.data(), static_cast<std::size_t>(layer.batch_norm->gamma.size()));
      fn(l, 3, layer.batch_norm->beta.data(), static_cast<std::size_t>(layer.batch_norm->beta.size()));
    }
  }
}

double* block(Gradients& g, std::size_t layer, int kind) {
  switch (kind) {
    case 0: return g.weights[layer].data();
    case 1: return g.bias[layer].data();
    case 2: return g.gamma[layer].data();
    default: return g.beta[layer].data();
  }
}

const double* block(const Gradients& g, std::size_t layer, int kind) {
  return block(const_cast<Gradients&>(g), layer, kind);
}

}  // namespace

std::string_view to_string(Regularizer regularizer) {
  switch (regularizer) {
    case Regularizer::none: return "none";
    case Regularizer::l2: return "l2";
    case Regularizer::dropout: return "dropout";
    case Regularizer::dropout_batchnorm: return "dropout_batchnorm";
  }
  return "unknown";
}

Regularizer parse_regularizer(std::string_view name) {
  if (name == "none") return Regularizer::none;
  if (name == "l2") return Regularizer::l2;
  if (name == "dropout") return Regularizer::dropout;
  if (name == "dropout_batchnorm") return Regularizer::dropout_batchnorm;
  throw ArgumentError("unknown regularizer '" + std::string(name) + "'");
}

bool TrainConfig::uses_dropout() const {
  return regularizer == Regularizer::dropout || regularizer == Regularizer::dropout_batchnorm;
}

void TrainConfig::validate(std::size_t hidden_layers) const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (max_epochs < 1) throw ArgumentError("max_epochs must be at least 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ArgumentError("momentum must lie in [0, 1)");
  if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw ArgumentError("rms_decay must lie in (0, 1)");
  if (regularizer == Regularizer::l2 && weight_decay < 0.0)
    throw ArgumentError("weight_decay must be non-negative");
  if (uses_dropout()) {
    if (dropout.size() != hidden_layers)
      throw ArgumentError("expected " + std::to_string(hidden_layers) +
                          " dropout probabilities, got " + std::to_string(dropout.size()));
    for (const double p : dropout)
      if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout probabilities must lie in [0, 1)");
  }
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers) {
    g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(Vector::Zero(layer.bias.size()));
    const Eigen::Index n = layer.batch_norm ? layer.bias.size() : 0;
    g.gamma.push_back(Vector::Zero(n));
    g.beta.push_back(Vector::Zero(n));
  }
  return g;
}

double batch_loss(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                  const LossMode& mode) {
  return run_forward(model, batch, labels, mode).loss;
}

LossAndGradients loss_and_gradients(const MlpModel& model, const Matrix& batch,
                                    std::span<const int> labels, const LossMode& mode) {
  Tape tape = run_forward(model, batch, labels, mode);
  LossAndGradients out{tape.loss, Gradients::zeros_like(model), {}, {}};
  for (const auto& t : tape.hidden) {
    out.batch_mean.push_back(t.batch_mean.transpose());
    out.batch_var.push_back(t.batch_var.transpose());
  }
  auto& g = out.gradients;
  const double n = double(batch.rows());

  Matrix delta = tape.probabilities;
  for (std::size_t r = 0; r < labels.size(); ++r) delta(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
  delta /= n;

  const std::size_t last = model.layers.size() - 1;
  g.weights[last].noalias() = tape.last_input.transpose() * delta;
  g.bias[last] = delta.colwise().sum().transpose();
  Matrix upstream = delta * model.layers[last].weights.transpose();

  for (std::size_t i = model.hidden_layers(); i >= 1; --i) {
    const auto& layer = model.layers[i - 1];
    const auto& t = tape.hidden[i - 1];
    Matrix d = mode.dropout_masks.empty() ? upstream : upstream.cwiseProduct(mode.dropout_masks[i - 1]);
    switch (model.activation) {
      case Activation::relu: d = d.cwiseProduct((t.pre.array() > 0.0).cast<double>().matrix()); break;
      case Activation::sigmoid:
        d = d.cwiseProduct((t.output.array() * (1.0 - t.output.array())).matrix());
        break;
      case Activation::linear: break;
    }
    if (layer.batch_norm) {
      const auto& bn = *layer.batch_norm;
      g.gamma[i - 1] = d.cwiseProduct(t.zhat).colwise().sum().transpose();
      g.beta[i - 1] = d.colwise().sum().transpose();
      Matrix dzhat = d.array().rowwise() * bn.gamma.transpose().array();
      if (mode.batch_statistics) {
        const RowVector sum_d = dzhat.colwise().sum();
        const RowVector sum_dz = dzhat.cwiseProduct(t.zhat).colwise().sum();
        Matrix dz = (n * dzhat).rowwise() - sum_d;
        dz -= (t.zhat.array().rowwise() * sum_dz.array()).matrix();
        d = (dz.array().rowwise() * (t.inv_std.array() / n)).matrix();
      } else {
        d = (dzhat.array().rowwise() * t.inv_std.array()).matrix();
      }
    }
    g.weights[i - 1].noalias() = t.input.transpose() * d;
    g.bias[i - 1] = d.colwise().sum().transpose();
    if (i > 1) upstream = d * layer.weights.transpose();
  }
  return out;
}

RmsProp::RmsProp(const MlpModel& model, const TrainConfig& config)
    : config_(config),
      square_avg_(Gradients::zeros_like(model)),
      momentum_(Gradients::zeros_like(model)) {}

void RmsProp::step(MlpModel& model, const Gradients& data_gradients) {
  const bool l2 = config_.regularizer == Regularizer::l2 && config_.weight_decay > 0.0;
  for_each_block(model, [&](std::size_t l, int kind, double* p, std::size_t size) {
    const double* g = block(data_gradients, l, kind);
    double* v = block(square_avg_, l, kind);
    double* buf = block(momentum_, l, kind);
    for (std::size_t k = 0; k < size; ++k) {
      const double grad = l2 ? g[k] + config_.weight_decay * p[k] : g[k];
      v[k] = config_.rms_decay * v[k] + (1.0 - config_.rms_decay) * grad * grad;
      buf[k] = config_.momentum * buf[k] + grad / (std::sqrt(v[k]) + config_.rms_epsilon);
      p[k] -= config_.learning_rate * buf[k];
    }
  });
}

TrainResult train(const Dataset& train_set, const Dataset& validation_set,
                  std::span<const std::size_t> architecture, Activation activation,
                  const TrainConfig& config) {
  if (architecture.size() < 2) throw ArgumentError("architecture needs at least two layers");
  if (architecture.front() != train_set.dimension())
    throw ArgumentError("architecture input " + std::to_string(architecture.front()) +
                        " != dataset dimension " + std::to_string(train_set.dimension()));
  if (architecture.back() != static_cast<std::size_t>(train_set.num_classes))
    throw ArgumentError("architecture output must equal the number of classes");
  if (train_set.size() == 0) throw ArgumentError("empty training set");
  config.validate(architecture.size() - 2);

  MlpModel model =
      MlpModel::initialize(architecture, activation, derive_seed(config.seed, "init"),
                           config.uses_batch_norm());
  RmsProp optimizer(model, config);
  Rng order_rng(derive_seed(config.seed, "batch_order"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, 0};
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<Matrix> masks(config.uses_dropout() ? model.hidden_layers() : 0);
  Matrix batch;
  std::vector<int> labels;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      batch.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(train_set.dimension()));
      labels.resize(count);
      for (std::size_t r = 0; r < count; ++r) {
        batch.row(static_cast<Eigen::Index>(r)) =
            train_set.features.row(static_cast<Eigen::Index>(order[begin + r])).cast<double>();
        labels[r] = train_set.labels[order[begin + r]];
      }
      for (std::size_t i = 0; i < masks.size(); ++i) {
        const double p = config.dropout[i];
        const double keep_scale = 1.0 / (1.0 - p);
        auto& m = masks[i];
        m.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(model.layer_sizes[i + 1]));
        for (Eigen::Index k = 0; k < m.size(); ++k)
          m.data()[k] = dropout_rng.uniform() < p ? 0.0 : keep_scale;
      }
      const LossMode mode{true, masks};
      auto lg = loss_and_gradients(model, batch, labels, mode);
      if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLoss)
        throw DivergenceError(epoch, batch_index, lg.loss);
      loss_sum += lg.loss * double(count);
      optimizer.step(model, lg.gradients);

      // Running batch-norm statistics: momentum 0.1, unbiased variance.
      const double unbias = count > 1 ? double(count) / double(count - 1) : 1.0;
      for (std::size_t i = 1; i <= model.hidden_layers(); ++i) {
        auto& bn = model.layers[i - 1].batch_norm;
        if (!bn) continue;
        bn->running_mean = 0.9 * bn->running_mean + 0.1 * lg.batch_mean[i - 1];
        bn->running_var = 0.9 * bn->running_var + 0.1 * unbias * lg.batch_var[i - 1];
      }
    }

    const double validation_loss = cross_entropy(model, validation_set);
    if (!std::isfinite(validation_loss)) throw DivergenceError(epoch, batch_index, validation_loss);
    result.history.push_back({epoch, loss_sum / double(order.size()), validation_loss});
    if (validation_loss < best_loss) {
      best_loss = validation_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

double grad_check(const MlpModel& model, const Matrix& batch, std::span<const int> labels) {
  // Five-point stencil: truncation O(h^4), roundoff ~ eps * loss / h.
  constexpr double kStep = 1e-3;
  constexpr double kFloor = 1e-6;
  const auto analytic = loss_and_gradients(model, batch, labels).gradients;
  MlpModel probe = model;

  // ReLU units that switch on/off inside the stencil make the difference
  // quotient meaningless; such parameters are skipped.
  const bool kinked = model.activation == Activation::relu;
  auto pattern = [&](const MlpModel& m) {
    std::vector<bool> on;
    for (const auto& t : run_forward(m, batch, labels, LossMode{}).hidden)
      for (Eigen::Index k = 0; k < t.pre.size(); ++k) on.push_back(t.pre.data()[k] > 0.0);
    return on;
  };
  const auto base = kinked ? pattern(model) : std::vector<bool>{};

  double worst = 0.0;
  for_each_block(probe, [&](std::size_t l, int kind, double* p, std::size_t size) {
    const double* g = block(analytic, l, kind);
    for (std::size_t k = 0; k < size; ++k) {
      const double saved = p[k];
      auto loss_at = [&](double delta) {
        p[k] = saved + delta;
        return batch_loss(probe, batch, labels);
      };
      bool crosses = false;
      if (kinked) {
        for (const double delta : {-2.0 * kStep, 2.0 * kStep}) {
          p[k] = saved + delta;
          crosses = crosses || pattern(probe) != base;
        }
      }
      if (!crosses) {
        const double numeric =
            (-loss_at(2 * kStep) + 8 * loss_at(kStep) - 8 * loss_at(-kStep) + loss_at(-2 * kStep)) / (12 * kStep);
        const double scale = std::max({std::abs(numeric), std::abs(g[k]), kFloor});
        worst = std::max(worst, std::abs(numeric - g[k]) / scale);
      }
      p[k] = saved;
    }
  });
  return worst;
}

}  // namespace nimp
