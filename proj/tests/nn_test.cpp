#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "splinecnn/harness/gradcheck.hpp"
#include "splinecnn/nn/activation.hpp"
#include "splinecnn/nn/adam.hpp"
#include "splinecnn/nn/dense.hpp"
#include "splinecnn/nn/loss.hpp"

using namespace splinecnn;

TEST(Dense, IdentityAndBias) {
  nn::DenseLayer<double> dense(3, 3);
  for (std::size_t k = 0; k < 3; ++k) dense.weight()(k, k) = 1.0;
  Matrix<double> x(2, 3, std::vector<double>{1, -2, 3, 0.5, 0, 7});
  EXPECT_EQ(dense.forward(x), x);

  dense.bias() = Matrix<double>(1, 3, std::vector<double>{0.1, 0.2, 0.3});
  const auto y = dense.forward(Matrix<double>(4, 3));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(y(r, c), 0.1 * static_cast<double>(c + 1));
  EXPECT_THROW(dense.forward(Matrix<double>(1, 2)), std::invalid_argument);
  EXPECT_THROW(nn::DenseLayer<double>(0, 2), std::invalid_argument);
}

TEST(Dense, CheckpointRoundTrip) {
  nn::DenseLayer<float> dense(5, 2);
  dense.init_weights(9);
  std::stringstream buf;
  dense.save(buf);
  const auto back = nn::DenseLayer<float>::load(buf);
  EXPECT_EQ(back.weight(), dense.weight());
  EXPECT_EQ(back.bias(), dense.bias());
}

TEST(Elu, Values) {
  Matrix<double> x(1, 4, std::vector<double>{0.0, 1.0, -1.0, -30.0});
  const auto y = nn::elu(x);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 1.0);
  EXPECT_NEAR(y(0, 2), -0.6321205588285577, 1e-15);
  EXPECT_NEAR(y(0, 3), -1.0, 1e-12);
  const auto g = nn::elu_backward(x, Matrix<double>(1, 4, 1.0));
  EXPECT_EQ(g(0, 1), 1.0);
  EXPECT_NEAR(g(0, 2), std::exp(-1.0), 1e-15);
}

TEST(Dropout, IdentityCases) {
  std::mt19937_64 rng(1);
  Matrix<double> x(10, 10, 3.0);
  std::vector<double> scale;
  EXPECT_EQ(nn::dropout(x, 0.0, true, rng, &scale), x);
  EXPECT_TRUE(scale.empty());
  EXPECT_EQ(nn::dropout(x, 0.5, false, rng, &scale), x);
  EXPECT_THROW(nn::dropout(x, 1.0, true, rng), std::invalid_argument);
  EXPECT_THROW(nn::dropout(x, -0.1, true, rng), std::invalid_argument);
}

TEST(Dropout, MeanPreservedWithinThreeSigma) {
  std::mt19937_64 rng(2);
  const double p = 0.5;
  Matrix<double> x(100000, 1, 1.0);
  std::vector<double> scale;
  const auto y = nn::dropout(x, p, true, rng, &scale);
  double sum = 0.0;
  for (double v : y.flat()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    sum += v;
  }
  const double n = 100000.0;
  const double sigma = std::sqrt(p / (1.0 - p) / n);  // std of the mean of 1/(1-p)*Bernoulli(1-p)
  EXPECT_LE(std::abs(sum / n - 1.0), 3.0 * sigma);
  const auto g = nn::dropout_backward(scale, Matrix<double>(100000, 1, 1.0));
  EXPECT_EQ(g, y);
}

TEST(CrossEntropy, UniformLogits) {
  Matrix<double> logits(3, 7, 0.25);
  const std::vector<int> labels{0, 3, 6};
  const auto r = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
  EXPECT_NEAR(r.loss, std::log(7.0), 1e-12);
  EXPECT_NEAR(r.loss, 1.9459, 1e-4);
  EXPECT_EQ(r.count, 3u);
}

TEST(CrossEntropy, LargeMarginDrivesLossToZero) {
  Matrix<double> logits(1, 4);
  logits(0, 2) = 50.0;
  const std::vector<int> labels{2};
  const auto r = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
  EXPECT_LT(r.loss, 1e-20);
  EXPECT_EQ(r.correct, 1u);
  logits(0, 2) = 1000.0;  // stays finite
  EXPECT_TRUE(std::isfinite(nn::softmax_cross_entropy(logits, std::span<const int>(labels)).loss));
}

TEST(CrossEntropy, MaskSelectsRows) {
  Matrix<double> logits(3, 2, std::vector<double>{1, 0, 0, 1, 5, -5});
  const std::vector<int> labels{0, 0, 1};
  const std::vector<std::uint8_t> mask{1, 0, 0};
  const auto r = nn::softmax_cross_entropy(logits, std::span<const int>(labels), std::span<const std::uint8_t>(mask));
  EXPECT_EQ(r.count, 1u);
  EXPECT_NEAR(r.loss, std::log1p(std::exp(-1.0)), 1e-12);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(r.grad(1, c), 0.0);
    EXPECT_EQ(r.grad(2, c), 0.0);
  }
  const std::vector<int> bad{0, 0, 2};
  EXPECT_THROW(nn::softmax_cross_entropy(logits, std::span<const int>(bad)), std::invalid_argument);
}

TEST(Components, FiniteDifferenceChecks) {
  for (const auto& r : harness::grad_check_components(31)) {
    EXPECT_TRUE(r.pass) << r.name << " rel err " << r.max_relative_error;
    EXPECT_LE(r.max_relative_error, 1e-5) << r.name;
  }
}

namespace {
std::vector<double> run_adam(nn::AdamOptions options, std::vector<double> theta, const std::vector<double>& grad,
                             int steps) {
  std::vector<double> g = grad;
  nn::Adam<double> adam(options);
  std::vector<nn::ParamRef<double>> params{{"p", theta, g}};
  for (int k = 0; k < steps; ++k) adam.step(params);
  return theta;
}
}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  const std::vector<double> theta{1.0, -2.0, 0.5};
  EXPECT_EQ(run_adam({}, theta, {0.0, 0.0, 0.0}, 50), theta);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  nn::AdamOptions options;
  options.lr = 0.0;
  options.weight_decay = 0.1;
  const std::vector<double> theta{1.0, -2.0, 0.5};
  EXPECT_EQ(run_adam(options, theta, {0.3, -7.0, 2.0}, 20), theta);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  nn::AdamOptions options;
  options.lr = 0.01;
  std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<double> g{0.5, -3.0, 1e-3};
  nn::Adam<double> adam(options);
  std::vector<nn::ParamRef<double>> params{{"p", theta, g}};
  std::vector<double> prev = theta;
  for (int k = 0; k < 2000; ++k) {
    prev = theta;
    adam.step(params);
  }
  EXPECT_EQ(adam.step_count(), 2000u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(theta[i] - prev[i]), options.lr, 1e-4 * options.lr);
    EXPECT_EQ(std::signbit(theta[i] - prev[i]), !std::signbit(g[i]));
  }
}

TEST(Adam, WeightDecayModes) {
  nn::AdamOptions decoupled;
  decoupled.lr = 0.1;
  decoupled.weight_decay = 0.5;
  const auto a = run_adam(decoupled, {2.0}, {0.0}, 1);
  // decay 2 * (1 - 0.05), then zero-gradient Adam step
  EXPECT_DOUBLE_EQ(a[0], 1.9);
  nn::AdamOptions coupled = decoupled;
  coupled.decay_mode = nn::WeightDecay::coupled;
  const auto b = run_adam(coupled, {2.0}, {0.0}, 1);
  // gradient 1.0 -> first step moves by lr * 1 / (1 + eps)
  EXPECT_NEAR(b[0], 2.0 - 0.1 / (1.0 + 1e-8), 1e-12);
  const auto c = run_adam(coupled, {2.0}, {0.0}, 3);
  const auto d = run_adam(decoupled, {2.0}, {0.0}, 3);
  EXPECT_NE(c[0], d[0]);
}

TEST(Adam, Deterministic) {
  std::mt19937_64 rng(3);
  std::vector<double> grad(50);
  for (double& v : grad) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  nn::AdamOptions options;
  options.weight_decay = 0.01;
  const std::vector<double> theta(50, 0.3);
  EXPECT_EQ(run_adam(options, theta, grad, 100), run_adam(options, theta, grad, 100));
}

TEST(Adam, ParameterListMustNotChange) {
  std::vector<double> a{1.0}, ga{1.0}, b{2.0}, gb{1.0};
  nn::Adam<double> adam;
  std::vector<nn::ParamRef<double>> one{{"a", a, ga}};
  adam.step(one);
  std::vector<nn::ParamRef<double>> two{{"a", a, ga}, {"b", b, gb}};
  EXPECT_THROW(adam.step(two), std::invalid_argument);
}
