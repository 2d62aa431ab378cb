#include "nimp/nn.hpp"

#include "nimp/error.hpp"
#include "nimp/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nimp {
namespace {

void activate(Matrix& m, Activation activation) {
  switch (activation) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::sigmoid: m = (1.0 + (-m.array()).exp()).inverse().matrix(); break;
    case Activation::linear: break;
  }
}

Matrix hidden_step(const DenseLayer& layer, const Matrix& in, Activation activation) {
  Matrix z = in * layer.weights;
  z.rowwise() += layer.bias.transpose();
  if (layer.batch_norm) {
    const auto& bn = *layer.batch_norm;
    const RowVector scale =
        (bn.gamma.array() / (bn.running_var.array() + BatchNorm::kEpsilon).sqrt()).transpose();
    const RowVector shift = bn.beta.transpose() - bn.running_mean.transpose().cwiseProduct(scale);
    z.array().rowwise() *= scale.array();
    z.rowwise() += shift;
  }
  activate(z, activation);
  return z;
}

Matrix softmax_step(const DenseLayer& layer, const Matrix& in) {
  Matrix z = in * layer.weights;
  z.rowwise() += layer.bias.transpose();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return z;
}

void apply_overrides(Matrix& outputs, std::size_t layer, Overrides overrides) {
  for (const auto& o : overrides)
    if (o.layer == layer) outputs.col(static_cast<Eigen::Index>(o.neuron)).setConstant(o.value);
}

void check_batch(const MlpModel& model, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_size())
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                     std::to_string(model.input_size()));
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "linear") return Activation::linear;
  throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpModel::hidden_neurons() const {
  std::size_t total = 0;
  for (std::size_t i = 1; i + 1 < layer_sizes.size(); ++i) total += layer_sizes[i];
  return total;
}

bool MlpModel::has_batch_norm() const {
  return std::any_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.batch_norm.has_value(); });
}

bool MlpModel::same_architecture(const MlpModel& other) const {
  return layer_sizes == other.layer_sizes && activation == other.activation &&
         has_batch_norm() == other.has_batch_norm();
}

void MlpModel::validate() const {
  if (layer_sizes.size() < 2) throw ShapeError("model needs at least input and output layers");
  if (layers.size() != layer_sizes.size() - 1)
    throw ShapeError("model has " + std::to_string(layers.size()) + " parameter blocks for " +
                     std::to_string(layer_sizes.size()) + " layers");
  for (std::size_t i = 1; i < layer_sizes.size(); ++i) {
    const auto& l = layers[i - 1];
    const auto fan_in = static_cast<Eigen::Index>(layer_sizes[i - 1]);
    const auto fan_out = static_cast<Eigen::Index>(layer_sizes[i]);
    if (layer_sizes[i] == 0) throw ShapeError("layer " + std::to_string(i) + " is empty");
    if (l.weights.rows() != fan_in || l.weights.cols() != fan_out || l.bias.size() != fan_out)
      throw ShapeError("parameter shape mismatch in layer " + std::to_string(i));
    if (l.batch_norm) {
      if (i + 1 == layer_sizes.size())
        throw ShapeError("batch norm is only supported on hidden layers");
      const auto& bn = *l.batch_norm;
      if (bn.gamma.size() != fan_out || bn.beta.size() != fan_out ||
          bn.running_mean.size() != fan_out || bn.running_var.size() != fan_out)
        throw ShapeError("batch-norm shape mismatch in layer " + std::to_string(i));
      if ((bn.running_var.array() <= 0.0).any())
        throw ArgumentError("batch-norm running variance must be positive");
    }
  }
}

MlpModel MlpModel::initialize(std::span<const std::size_t> layer_sizes, Activation activation,
                              std::uint64_t seed, bool batch_norm) {
  MlpModel model;
  model.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  model.activation = activation;
  if (model.layer_sizes.size() < 2) throw ShapeError("model needs at least two layers");
  Rng rng(seed);
  for (std::size_t i = 1; i < model.layer_sizes.size(); ++i) {
    const auto fan_in = model.layer_sizes[i - 1];
    const auto fan_out = model.layer_sizes[i];
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index k = 0; k < layer.weights.size(); ++k)
      layer.weights.data()[k] = rng.uniform(-limit, limit);
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(fan_out));
    if (batch_norm && i + 1 < model.layer_sizes.size()) {
      const auto n = static_cast<Eigen::Index>(fan_out);
      layer.batch_norm = BatchNorm{Vector::Ones(n), Vector::Zero(n), Vector::Zero(n),
                                   Vector::Ones(n)};
    }
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

void check_overrides(const MlpModel& model, Overrides overrides) {
  for (const auto& o : overrides) {
    if (o.layer == 0 || o.layer > model.hidden_layers())
      throw ArgumentError("override layer " + std::to_string(o.layer) +
                          " is not a hidden layer (1.." + std::to_string(model.hidden_layers()) +
                          ")");
    if (o.neuron >= model.layer_sizes[o.layer])
      throw ArgumentError("override neuron " + std::to_string(o.neuron) + " out of range for layer " +
                          std::to_string(o.layer));
  }
}

ForwardResult forward(const MlpModel& model, const Matrix& batch, Overrides overrides) {
  check_batch(model, batch);
  check_overrides(model, overrides);
  ForwardResult result;
  const Matrix* in = &batch;
  for (std::size_t i = 1; i <= model.hidden_layers(); ++i) {
    Matrix out = hidden_step(model.layers[i - 1], *in, model.activation);
    apply_overrides(out, i, overrides);
    result.hidden.push_back({i, std::move(out)});
    in = &result.hidden.back().values;
  }
  result.probabilities = softmax_step(model.layers.back(), *in);
  return result;
}

Matrix layer_output(const MlpModel& model, const Matrix& batch, std::size_t layer) {
  check_batch(model, batch);
  if (layer > model.hidden_layers())
    throw ArgumentError("layer " + std::to_string(layer) + " is not a hidden layer");
  Matrix out = batch;
  for (std::size_t i = 1; i <= layer; ++i) out = hidden_step(model.layers[i - 1], out, model.activation);
  return out;
}

Matrix forward_from(const MlpModel& model, std::size_t layer, Matrix outputs, Overrides overrides) {
  check_overrides(model, overrides);
  if (layer > model.hidden_layers())
    throw ArgumentError("layer " + std::to_string(layer) + " is not a hidden layer");
  if (static_cast<std::size_t>(outputs.cols()) != model.layer_sizes[layer])
    throw ShapeError("outputs have " + std::to_string(outputs.cols()) + " columns, layer " +
                     std::to_string(layer) + " has " + std::to_string(model.layer_sizes[layer]));
  for (const auto& o : overrides)
    if (o.layer < layer)
      throw ArgumentError("override on layer " + std::to_string(o.layer) +
                          " precedes the starting layer " + std::to_string(layer));
  apply_overrides(outputs, layer, overrides);
  for (std::size_t i = layer + 1; i <= model.hidden_layers(); ++i) {
    outputs = hidden_step(model.layers[i - 1], outputs, model.activation);
    apply_overrides(outputs, i, overrides);
  }
  return softmax_step(model.layers.back(), outputs);
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
  std::vector<int> out(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probabilities.cols(); ++c)
      if (probabilities(r, c) > probabilities(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double error_rate(const Matrix& probabilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size())
    throw ShapeError("probability rows and labels differ");
  if (labels.empty()) return 0.0;
  const auto predicted = argmax_rows(probabilities);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predicted[i] != labels[i];
  return double(wrong) / double(labels.size());
}

double evaluate(const MlpModel& model, const Dataset& set, Overrides overrides) {
  if (set.dimension() != model.input_size())
    throw ShapeError("dataset dimension " + std::to_string(set.dimension()) +
                     " != model input " + std::to_string(model.input_size()));
  check_overrides(model, overrides);
  std::size_t wrong = 0;
  for (std::size_t begin = 0; begin < set.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, set.size() - begin);
    const auto predicted = argmax_rows(forward(model, set.rows(begin, count), overrides).probabilities);
    for (std::size_t i = 0; i < count; ++i) wrong += predicted[i] != set.labels[begin + i];
  }
  return set.size() == 0 ? 0.0 : double(wrong) / double(set.size());
}

double cross_entropy(const MlpModel& model, const Dataset& set) {
  double total = 0.0;
  for (std::size_t begin = 0; begin < set.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, set.size() - begin);
    const Matrix p = forward(model, set.rows(begin, count)).probabilities;
    for (std::size_t i = 0; i < count; ++i) {
      const double q = p(static_cast<Eigen::Index>(i), set.labels[begin + i]);
      total -= std::log(std::max(q, 1e-300));
    }
  }
  return set.size() == 0 ? 0.0 : total / double(set.size());
}

std::vector<ActivationMatrix> record_activations(const MlpModel& model, const Dataset& set) {
  if (set.dimension() != model.input_size())
    throw ShapeError("dataset dimension does not match the model input");
  std::vector<ActivationMatrix> out;
  for (std::size_t i = 1; i <= model.hidden_layers(); ++i)
    out.push_back({i, Matrix(static_cast<Eigen::Index>(set.size()),
                             static_cast<Eigen::Index>(model.layer_sizes[i]))});
  for (std::size_t begin = 0; begin < set.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, set.size() - begin);
    auto result = forward(model, set.rows(begin, count));
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i].values.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) =
          result.hidden[i].values;
  }
  return out;
}

MlpModel absorb_constant(const MlpModel& model, const NeuronOverride& o) {
  const NeuronOverride one[] = {o};
  check_overrides(model, one);
  if (model.layer_sizes[o.layer] == 1) throw ArgumentError("cannot remove the only neuron of a layer");
  const auto j = static_cast<Eigen::Index>(o.neuron);
  auto drop = [j](auto& v) {
    const Eigen::Index n = v.size();
    auto copy = v;
    v.resize(n - 1);
    v.head(j) = copy.head(j);
    v.tail(n - 1 - j) = copy.tail(n - 1 - j);
  };

  MlpModel out = model;
  auto& producer = out.layers[o.layer - 1];
  auto& consumer = out.layers[o.layer];

  consumer.bias += consumer.weights.row(j).transpose() * o.value;

  Matrix w(producer.weights.rows(), producer.weights.cols() - 1);
  w << producer.weights.leftCols(j), producer.weights.rightCols(producer.weights.cols() - 1 - j);
  producer.weights = std::move(w);
  drop(producer.bias);
  if (producer.batch_norm) {
    drop(producer.batch_norm->gamma);
    drop(producer.batch_norm->beta);
    drop(producer.batch_norm->running_mean);
    drop(producer.batch_norm->running_var);
  }

  Matrix w2(consumer.weights.rows() - 1, consumer.weights.cols());
  w2 << consumer.weights.topRows(j), consumer.weights.bottomRows(consumer.weights.rows() - 1 - j);
  consumer.weights = std::move(w2);

  out.layer_sizes[o.layer] -= 1;
  out.validate();
  return out;
}

}  // namespace nimp
