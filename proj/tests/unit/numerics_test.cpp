// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "dfm/mlp.hpp"
#include "dfm/numerics.hpp"
#include "dfm/optim.hpp"
#include "test_util.hpp"

namespace dfm {
namespace {

// Output of ForwardIsReproducibleAcrossRuns recorded from a separate process run.
constexpr double kFrozenForward0 = 0x1.9b3159a862f4ap-7;
constexpr double kFrozenForward1 = 0x1.201cc27a93cd8p-9;

TEST(GaussianLogPdf, StandardNormalValues) {
  const double zero[1] = {0.0}, one[1] = {1.0};
  EXPECT_NEAR(gaussian_log_pdf(zero, zero, 1.0), -0.918938533204673, 1e-12);
  EXPECT_NEAR(gaussian_log_pdf(one, zero, 1.0), -1.418938533204673, 1e-12);
}

TEST(GaussianLogPdf, IntegratesToOneByTrapezoid) {
  const double mean[1] = {0.3};
  const double var = 0.7;
  const double h = 1e-3;
  double integral = 0.0;
  for (int i = 0; i <= 30000; ++i) {
    const double x[1] = {-15.0 + h * i};
    const double w = (i == 0 || i == 30000) ? 0.5 : 1.0;
    integral += w * std::exp(gaussian_log_pdf(x, mean, var)) * h;
  }
  EXPECT_NEAR(integral, 1.0, 1e-6);

  // Same check in 2D on a coarser grid.
  const double mean2[2] = {-0.5, 0.25};
  const double h2 = 0.01;
  double integral2 = 0.0;
  for (int i = 0; i <= 1600; ++i) {
    for (int j = 0; j <= 1600; ++j) {
      const double x[2] = {-8.0 + h2 * i, -8.0 + h2 * j};
      const double w = ((i == 0 || i == 1600) ? 0.5 : 1.0) * ((j == 0 || j == 1600) ? 0.5 : 1.0);
      integral2 += w * std::exp(gaussian_log_pdf(x, mean2, 0.5)) * h2 * h2;
    }
  }
  EXPECT_NEAR(integral2, 1.0, 1e-6);
}

TEST(GaussianLogPdf, Errors) {
  const double a[2] = {0.0, 0.0}, b[1] = {0.0};
  EXPECT_THROW(gaussian_log_pdf(a, a, 0.0), DomainError);
  EXPECT_THROW(gaussian_log_pdf(a, a, -1.0), DomainError);
  EXPECT_THROW(gaussian_log_pdf(a, b, 1.0), ShapeError);
}

TEST(LogSumExp, Examples) {
  const double two_zeros[2] = {0.0, 0.0};
  const double two_large[2] = {1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(two_zeros), 0.693147180559945, 1e-12);
  EXPECT_NEAR(log_sum_exp(two_large), 1000.693147180559945, 1e-9);
  EXPECT_THROW(log_sum_exp(std::span<const double>{}), ArgumentError);
}

TEST(LogSumExp, MatchesNaiveSummationAndIsShiftInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(10);
    for (double& x : v) x = rng.uniform(-3.0, 3.0);
    double naive = 0.0;
    for (double x : v) naive += std::exp(x);
    naive = std::log(naive);
    const double lse = log_sum_exp(v);
    EXPECT_NEAR(lse, naive, 1e-12);

    const double shift = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += shift;
    EXPECT_NEAR(log_sum_exp(shifted) - shift, lse, 1e-12);
  }
}

TEST(Rng, EqualSeedsGiveEqualDraws) {
  Rng a(12345), b(12345), c(12346);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitIsIndependentOfParentDraws) {
  Rng parent(99);
  Rng child_before = parent.split("expert-3");
  for (int i = 0; i < 57; ++i) parent.next_u64();
  Rng child_after = parent.split("expert-3");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(child_before.next_u64(), child_after.next_u64());

  Rng other = Rng(99).split("expert-4");
  Rng same = Rng(99).split("expert-3");
  EXPECT_NE(other.next_u64(), same.next_u64());
  EXPECT_NE(Rng(99).split(std::uint64_t{1}).next_u64(), Rng(99).split(std::uint64_t{2}).next_u64());
}

TEST(Rng, DistributionsAreSane) {
  Rng rng(3);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);

  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) ++hist[rng.uniform_index(5)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);

  auto perm = rng.permutation(50);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(perm[i], i);
}

MlpShape small_shape(std::size_t in, std::size_t out, std::vector<std::size_t> hidden,
                     Activation act = Activation::kTanh, std::size_t tf = 4) {
  MlpShape s;
  s.input_dim = in;
  s.output_dim = out;
  s.hidden = std::move(hidden);
  s.activation = act;
  s.time_features = tf;
  return s;
}

TEST(Mlp, ParameterCountFormula) {
  const MlpShape s = small_shape(2, 3, {8, 5}, Activation::kTanh, 16);
  EXPECT_EQ(s.param_count(), (18 + 1) * 8 + (8 + 1) * 5 + (5 + 1) * 3);
  EXPECT_EQ(MlpModel(s).param_count(), s.param_count());
  EXPECT_EQ(s.layer_dims(), (std::vector<std::size_t>{18, 8, 5, 3}));
}

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const MlpModel m(small_shape(3, 2, {7}));
  const double x[3] = {1.0, -2.0, 0.5};
  EXPECT_EQ(mlp_forward(m, x, 0.3), Vector::Zero(2));
}

TEST(Mlp, IdentityLinearLayerReturnsInputSlice) {
  MlpModel m(small_shape(3, 3, {}, Activation::kTanh, 4));
  Vector p = Vector::Zero(static_cast<Eigen::Index>(m.param_count()));
  // W is 3 x 7 row-major; identity on the first three inputs.
  for (int i = 0; i < 3; ++i) p[i * 7 + i] = 1.0;
  m.set_params(p);
  const double x[3] = {0.25, -1.5, 4.0};
  const Vector y = mlp_forward(m, x, 0.77);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Mlp, TimeEmbeddingLayout) {
  const double t[1] = {0.125};
  const Matrix e = time_embedding(t, 4);
  EXPECT_NEAR(e(0, 0), std::sin(std::numbers::pi * 0.125), 1e-15);
  EXPECT_NEAR(e(0, 1), std::cos(std::numbers::pi * 0.125), 1e-15);
  EXPECT_NEAR(e(0, 2), std::sin(2 * std::numbers::pi * 0.125), 1e-15);
  EXPECT_NEAR(e(0, 3), std::cos(2 * std::numbers::pi * 0.125), 1e-15);
}

TEST(Mlp, ForwardIsReproducibleAcrossRuns) {
  auto run = [] {
    Rng rng(2024);
    MlpModel m = MlpModel::initialized(small_shape(2, 2, {16, 16}, Activation::kTanh, 16), rng);
    Vector p = m.params();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.01 * rng.normal();
    m.set_params(p);
    const double x[2] = {0.3, -1.2};
    return mlp_forward(m, x, 0.42);
  };
  const Vector a = run(), b = run();
  ASSERT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 2), 0);
  EXPECT_EQ(a[0], kFrozenForward0);
  EXPECT_EQ(a[1], kFrozenForward1);
}

TEST(Mlp, ShapeErrors) {
  const MlpModel m(small_shape(3, 2, {4}));
  const double x[2] = {1.0, 2.0};
  EXPECT_THROW(mlp_forward(m, x, 0.5), ShapeError);
  MlpShape bad = small_shape(3, 2, {4}, Activation::kTanh, 3);
  EXPECT_THROW(MlpModel{bad}, ArgumentError);
}

TEST(MlpGrad, ZeroNetSquaredErrorToZeroHasZeroGradient) {
  const MlpModel m(small_shape(2, 2, {5}));
  const double x[2] = {0.4, 0.1};
  const LossGrad lg = mlp_grad(m, x, 0.5, LossSpec::squared_error(Vector::Zero(2)));
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad, Vector::Zero(static_cast<Eigen::Index>(m.param_count())));
}

TEST(MlpGrad, UniformLogitsCrossEntropyIsLogK) {
  const MlpModel m(small_shape(2, 8, {5}));
  const double x[2] = {0.4, 0.1};
  EXPECT_NEAR(mlp_grad(m, x, 0.5, LossSpec::cross_entropy(3)).loss, std::log(8.0), 1e-12);
  EXPECT_NEAR(std::log(8.0), 2.07944, 1e-5);
}

TEST(MlpGrad, RejectsUnknownLossAndBadLabel) {
  const MlpModel m(small_shape(2, 3, {5}));
  const double x[2] = {0.4, 0.1};
  LossSpec bogus;
  bogus.kind = static_cast<LossKind>(42);
  EXPECT_THROW(mlp_grad(m, x, 0.5, bogus), ArgumentError);
  EXPECT_THROW(mlp_grad(m, x, 0.5, LossSpec::cross_entropy(3)), ArgumentError);
}

// Property: for random small models, every parameter's gradient matches
// central finite differences.
TEST(MlpGrad, MatchesFiniteDifferencesOnRandomModels) {
  Rng rng(11);
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t in = 1 + rng.uniform_index(3);
    const std::size_t out = 1 + rng.uniform_index(4);
    std::vector<std::size_t> hidden(rng.uniform_index(3));
    for (auto& h : hidden) h = 1 + rng.uniform_index(16);
    const Activation act = trial % 2 == 0 ? Activation::kTanh : Activation::kSilu;
    MlpModel m = MlpModel::initialized(small_shape(in, out, hidden, act, 2 * rng.uniform_index(3)), rng);
    Vector p = m.params();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.3 * rng.normal();
    m.set_params(p);

    const Vector x = testing::random_vector(rng, in, 1.5);
    const double t = rng.uniform();
    const LossSpec spec = trial % 3 == 0
                              ? LossSpec::cross_entropy(rng.uniform_index(out))
                              : LossSpec::squared_error(testing::random_vector(rng, out));
    const LossGrad lg = mlp_grad(m, as_span(x), t, spec);
    auto loss = [&](const Vector& params) {
      MlpModel probe = m;
      probe.set_params(params);
      return mlp_grad(probe, as_span(x), t, spec).loss;
    };
    EXPECT_LT(testing::max_fd_relative_error(p, lg.grad, loss), 1e-4) << "trial " << trial;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState s = AdamState::for_params(1, 1e-3);
  Vector p = Vector::Constant(1, 0.5), g = Vector::Constant(1, 1.0);
  adam_step(s, p, g);
  EXPECT_NEAR(p[0] - 0.5, -1e-3, 1e-10);
  EXPECT_EQ(s.step_count, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  AdamState s = AdamState::for_params(3, 0.1);
  Vector p(3);
  p << 1.0, -2.0, 3.0;
  const Vector orig = p;
  for (int i = 0; i < 50; ++i) adam_step(s, p, Vector::Zero(3));
  EXPECT_EQ(p, orig);
  EXPECT_EQ(s.step_count, 50u);
}

TEST(Adam, DescendsQuadratic) {
  AdamState s = AdamState::for_params(1, 0.1);
  Vector theta = Vector::Constant(1, 1.0);
  for (int i = 0; i < 100; ++i) adam_step(s, theta, 2.0 * theta);
  EXPECT_LT(std::abs(theta[0]), 0.05);
}

TEST(Adam, DeterministicAndShapeChecked) {
  AdamState a = AdamState::for_params(2, 0.01), b = a;
  Vector pa(2), pb(2), g(2);
  pa << 0.1, 0.2;
  pb = pa;
  g << 0.3, -0.7;
  for (int i = 0; i < 10; ++i) {
    adam_step(a, pa, g);
    adam_step(b, pb, g);
  }
  EXPECT_EQ(std::memcmp(pa.data(), pb.data(), 2 * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(a.m.data(), b.m.data(), 2 * sizeof(double)), 0);
  Vector wrong(3);
  EXPECT_THROW(adam_step(a, pa, wrong), ShapeError);
}

TEST(Ema, ZeroDecayCopiesParams) {
  EmaState e = EmaState::from_params(Vector::Constant(2, 5.0), 0.0);
  Vector p(2);
  p << 1.0, -1.0;
  ema_update(e, p);
  EXPECT_EQ(e.shadow, p);
}

TEST(Ema, MatchesGeometricClosedForm) {
  for (double decay : {0.5, 0.9, 0.999}) {
    const int n = decay == 0.999 ? 1000 : 37;
    EmaState e = EmaState::from_params(Vector::Constant(1, 2.0), decay);
    const Vector p = Vector::Constant(1, -3.0);
    for (int i = 0; i < n; ++i) ema_update(e, p);
    const double dn = std::pow(decay, n);
    EXPECT_NEAR(e.shadow[0], 2.0 * dn + -3.0 * (1.0 - dn), 1e-9);
  }
  EmaState e = EmaState::from_params(Vector::Zero(2), 0.9);
  EXPECT_THROW(ema_update(e, Vector::Zero(3)), ShapeError);
  EXPECT_THROW(EmaState::from_params(Vector::Zero(2), 1.0), ArgumentError);
}

}  // namespace
}  // namespace dfm
