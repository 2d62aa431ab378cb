#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace nimp;
using namespace testing_support;

TEST(Forward, ZeroSigmoidNetIsUniform) {
  MlpModel m = MlpModel::initialize(std::vector<std::size_t>{6, 5, 4, 10}, Activation::sigmoid, 1);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  const auto r = forward(m, random_batch(7, 6, 2));
  for (const auto& h : r.hidden) EXPECT_TRUE((h.values.array() == 0.5).all());
  EXPECT_TRUE(((r.probabilities.array() - 0.1).abs() < 1e-15).all());
}

TEST(Forward, SoftmaxRowsSumToOne) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = random_model({8, 12, 7, 5}, s % 2 ? Activation::relu : Activation::sigmoid, s);
    const Matrix p = forward(m, random_batch(16, 8, s, -3, 3)).probabilities;
    EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
  }
}

TEST(Forward, ShapeMismatchThrows) {
  const auto m = random_model({4, 3, 2}, Activation::relu, 1);
  EXPECT_THROW(forward(m, random_batch(2, 5, 1)), ShapeError);
}

TEST(Forward, OverrideValidation) {
  const auto m = random_model({4, 3, 3, 2}, Activation::relu, 1);
  const Matrix x = random_batch(2, 4, 1);
  const NeuronOverride output_layer{3, 0, 0.0}, input_layer{0, 0, 0.0}, wide{1, 3, 0.0};
  EXPECT_THROW(forward(m, x, {&output_layer, 1}), ArgumentError);
  EXPECT_THROW(forward(m, x, {&input_layer, 1}), ArgumentError);
  EXPECT_THROW(forward(m, x, {&wide, 1}), ArgumentError);
}

TEST(Forward, OverrideWithOwnValueIsIdentity) {
  const auto m = random_model({3, 4, 3}, Activation::sigmoid, 5);
  const Matrix x = random_batch(1, 3, 6);
  const auto clean = forward(m, x);
  const NeuronOverride o{1, 2, clean.hidden[0].values(0, 2)};
  const auto same = forward(m, x, {&o, 1});
  EXPECT_EQ(clean.probabilities, same.probabilities);
}

TEST(Forward, OverrideToZeroEqualsZeroedOutgoingWeights) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_model({3, 4, 3}, Activation::relu, s);
    const Matrix x = random_batch(9, 3, s + 100);
    const NeuronOverride o{1, 1, 0.0};
    auto cut = m;
    cut.layers[1].weights.row(1).setZero();
    const Matrix a = forward(m, x, {&o, 1}).probabilities;
    const Matrix b = forward(cut, x).probabilities;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Forward, HiddenActivationsReflectOverrides) {
  const auto m = random_model({3, 4, 3, 2}, Activation::relu, 8);
  const NeuronOverride o{2, 1, 7.5};
  const auto r = forward(m, random_batch(4, 3, 2), {&o, 1});
  EXPECT_TRUE((r.hidden[1].values.col(1).array() == 7.5).all());
}

TEST(Forward, AbsorbConstantMatchesOverride) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto act = s % 2 ? Activation::relu : Activation::sigmoid;
    const auto m = random_model({5, 6, 4, 3}, act, s);
    const Matrix x = random_batch(11, 5, s + 50);
    const NeuronOverride o{1 + s % 2, s % 4, 0.37 * double(s)};
    const Matrix a = forward(m, x, {&o, 1}).probabilities;
    const auto reduced = absorb_constant(m, o);
    EXPECT_EQ(reduced.layer_sizes[o.layer], m.layer_sizes[o.layer] - 1);
    const Matrix b = forward(reduced, x).probabilities;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, ForwardFromMatchesFullPass) {
  const auto m = random_model({5, 6, 4, 3}, Activation::relu, 3);
  const Matrix x = random_batch(6, 5, 4);
  const NeuronOverride o{2, 0, 0.0};
  const Matrix full = forward(m, x, {&o, 1}).probabilities;
  const Matrix part = forward_from(m, 1, layer_output(m, x, 1), {&o, 1});
  EXPECT_LT((full - part).cwiseAbs().maxCoeff(), 1e-15);
  const NeuronOverride early{1, 0, 0.0};
  EXPECT_THROW(forward_from(m, 2, layer_output(m, x, 2), {&early, 1}), ArgumentError);
}

TEST(Forward, BatchNormUsesRunningStatistics) {
  auto m = random_model({3, 2, 2}, Activation::relu, 4, true);
  const Matrix x = random_batch(3, 3, 5);
  const auto& l = m.layers[0];
  const auto& bn = *l.batch_norm;
  Matrix z = x * l.weights;
  z.rowwise() += l.bias.transpose();
  Matrix expected(3, 2);
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 2; ++j) {
      const double zh = (z(r, j) - bn.running_mean[j]) / std::sqrt(bn.running_var[j] + BatchNorm::kEpsilon);
      expected(r, j) = std::max(0.0, bn.gamma[j] * zh + bn.beta[j]);
    }
  EXPECT_LT((layer_output(m, x, 1) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Argmax, TiesGoToLowestClass) {
  Matrix p(3, 3);
  p << 0.2, 0.4, 0.4, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.1, 0.1, 0.8;
  EXPECT_EQ(argmax_rows(p), (std::vector<int>{1, 0, 2}));
}

TEST(Evaluate, UniformModelOnBalancedSetIsChance) {
  MlpModel m = MlpModel::initialize(std::vector<std::size_t>{4, 3, 10}, Activation::relu, 1);
  for (auto& l : m.layers) l.weights.setZero();
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) y[i] = i % 10;
  EXPECT_DOUBLE_EQ(evaluate(m, dataset_from(random_batch(100, 4, 3), y)), 0.9);
}

TEST(Evaluate, MemorizingModelHasZeroError) {
  MlpModel m = MlpModel::initialize(std::vector<std::size_t>{4, 4, 4}, Activation::relu, 1);
  m.layers[0].weights = Matrix::Identity(4, 4);
  m.layers[1].weights = 10.0 * Matrix::Identity(4, 4);
  const auto d = dataset_from(Matrix::Identity(4, 4), {0, 1, 2, 3}, 4);
  EXPECT_EQ(evaluate(m, d), 0.0);
  EXPECT_EQ(evaluate(m, d), evaluate(m, d));
}

TEST(Evaluate, ChunkingDoesNotChangeResult) {
  const auto m = random_model({5, 8, 10}, Activation::relu, 9);
  const std::size_t n = kInferenceChunk + 37;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = int(i % 10);
  const auto d = dataset_from(random_batch(n, 5, 1), y);
  const Matrix p = forward(m, d.rows(0, n)).probabilities;
  EXPECT_DOUBLE_EQ(evaluate(m, d), error_rate(p, y));
}

TEST(RecordActivations, ShapesCodomainAndDeterminism) {
  const auto m = random_model({6, 7, 5, 10}, Activation::relu, 2);
  const auto d = dataset_from(random_batch(30, 6, 3), std::vector<int>(30, 1));
  const auto a = record_activations(m, d);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].layer, 1u);
  EXPECT_EQ(a[1].values.rows(), 30);
  EXPECT_EQ(a[1].values.cols(), 5);
  EXPECT_GE(a[0].values.minCoeff(), 0.0);
  EXPECT_EQ(record_activations(m, d)[1].values, a[1].values);

  const auto s = random_model({6, 7, 10}, Activation::sigmoid, 2);
  const auto b = record_activations(s, d);
  EXPECT_GT(b[0].values.minCoeff(), 0.0);
  EXPECT_LT(b[0].values.maxCoeff(), 1.0);
}

TEST(Model, InitializeIsBoundedSeededWithZeroBias) {
  const std::vector<std::size_t> sizes{20, 10, 5};
  const auto a = MlpModel::initialize(sizes, Activation::relu, 3);
  const auto b = MlpModel::initialize(sizes, Activation::relu, 3);
  const auto c = MlpModel::initialize(sizes, Activation::relu, 4);
  EXPECT_EQ(a.layers[0].weights, b.layers[0].weights);
  EXPECT_NE(a.layers[0].weights, c.layers[0].weights);
  EXPECT_LE(a.layers[0].weights.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 30.0));
  EXPECT_EQ(a.layers[0].weights.rows(), 20);
  EXPECT_EQ(a.layers[1].weights.cols(), 5);
  EXPECT_TRUE((a.layers[1].bias.array() == 0).all());
  EXPECT_NO_THROW(a.validate());
}

TEST(Model, ValidateRejectsBrokenInvariants) {
  auto m = random_model({3, 4, 2}, Activation::relu, 1, true);
  m.layers[0].batch_norm->running_var[0] = 0.0;
  EXPECT_THROW(m.validate(), Error);
  auto n = random_model({3, 4, 2}, Activation::relu, 1);
  n.layers[1].bias.resize(3);
  EXPECT_THROW(n.validate(), Error);
}
