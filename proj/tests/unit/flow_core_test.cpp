// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dfm/analytical_flow.hpp"
#include "dfm/partition.hpp"
#include "dfm/schedule.hpp"
#include "test_util.hpp"

namespace dfm {
namespace {

using testing::random_assignment;
using testing::random_points;
using testing::random_vector;

const Schedule kLinear{ScheduleKind::kLinear};
const Schedule kCosine{ScheduleKind::kCosine};

Dataset line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return Dataset(std::move(m));
}

Vector vec1(double v) { return Vector::Constant(1, v); }

TEST(Schedule, EndpointsAndMonotonicity) {
  for (const Schedule& s : {kLinear, kCosine}) {
    EXPECT_DOUBLE_EQ(s.alpha(0.0), 1.0);
    EXPECT_DOUBLE_EQ(s.sigma(0.0), 0.0);
    EXPECT_NEAR(s.alpha(1.0), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(s.sigma(1.0), 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double t0 = i / 1000.0, t1 = (i + 1) / 1000.0;
      ASSERT_LT(s.sigma(t0), s.sigma(t1));
      ASSERT_GT(s.alpha(t0), s.alpha(t1));
    }
    // Derivatives agree with central differences.
    for (double t : {0.1, 0.5, 0.9}) {
      const double h = 1e-6;
      EXPECT_NEAR(s.alpha_dot(t), (s.alpha(t + h) - s.alpha(t - h)) / (2 * h), 1e-8);
      EXPECT_NEAR(s.sigma_dot(t), (s.sigma(t + h) - s.sigma(t - h)) / (2 * h), 1e-8);
    }
  }
  EXPECT_THROW(kLinear.check_time(5e-4), DomainError);
  EXPECT_THROW(kLinear.check_time(1.5), DomainError);
  EXPECT_NO_THROW(kLinear.check_time(kDefaultTMin));
}

TEST(ConditionalFlow, Examples) {
  const Vector a = conditional_flow(kLinear, as_span(vec1(0.5)), as_span(vec1(0.0)), 0.5);
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  const Vector b = conditional_flow(kLinear, as_span(vec1(1.0)), as_span(vec1(2.0)), 0.5);
  EXPECT_DOUBLE_EQ(b[0], -2.0);
  EXPECT_THROW(conditional_flow(kLinear, as_span(vec1(0.0)), as_span(vec1(0.0)), 1e-4),
               DomainError);
}

TEST(ConditionalFlow, MatchesTimeDerivativeOfPath) {
  Rng rng(5);
  for (const Schedule& s : {kLinear, kCosine}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Vector x0 = random_vector(rng, 3), eps = random_vector(rng, 3);
      const double t = rng.uniform(0.05, 0.95), h = 1e-6;
      const Vector xt = s.alpha(t) * x0 + s.sigma(t) * eps;
      const Vector fd = ((s.alpha(t + h) * x0 + s.sigma(t + h) * eps) -
                         (s.alpha(t - h) * x0 + s.sigma(t - h) * eps)) /
                        (2 * h);
      const Vector u = conditional_flow(s, as_span(xt), as_span(x0), t);
      EXPECT_LT((u - fd).lpNorm<Eigen::Infinity>(), 1e-5);
    }
  }
}

TEST(MarginalFlow, Examples) {
  const AnalyticalFlow single(line({2.0}), kLinear);
  EXPECT_NEAR(single.marginal_flow(as_span(vec1(1.0)), 0.5)[0], -2.0, 1e-14);
  const AnalyticalFlow pair(line({-1.0, 1.0}), kLinear);
  EXPECT_NEAR(pair.marginal_flow(as_span(vec1(0.0)), 0.5)[0], 0.0, 1e-14);
}

// Direct evaluation of the summation form without log-space normalization.
Vector naive_marginal_flow(const Dataset& ds, const Schedule& s, const Vector& x, double t) {
  Vector num = Vector::Zero(x.size());
  double den = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Vector x0(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) x0[j] = ds.point(i)[static_cast<std::size_t>(j)];
    const double var = s.sigma(t) * s.sigma(t);
    const double dens = std::pow(2 * std::numbers::pi * var, -0.5 * static_cast<double>(x.size())) *
                        std::exp(-(x - s.alpha(t) * x0).squaredNorm() / (2 * var));
    const Vector u = s.alpha_dot(t) * x0 + s.sigma_dot(t) * (x - s.alpha(t) * x0) / s.sigma(t);
    num += u * dens * ds.weights()[static_cast<Eigen::Index>(i)];
    den += dens * ds.weights()[static_cast<Eigen::Index>(i)];
  }
  return num / den;
}

TEST(MarginalFlow, MatchesNaiveSummation) {
  Rng rng(17);
  const Dataset ds(random_points(rng, 32, 2, 1.5));
  for (const Schedule& s : {kLinear, kCosine}) {
    const AnalyticalFlow flow(ds, s);
    for (int probe = 0; probe < 10; ++probe) {
      const double t = rng.uniform(0.3, 1.0);
      const Vector x = random_vector(rng, 2, 2.0);
      const Vector exact = flow.marginal_flow(as_span(x), t);
      EXPECT_LT((exact - naive_marginal_flow(ds, s, x, t)).lpNorm<Eigen::Infinity>(), 1e-10);
    }
  }
}

TEST(ExpertFlow, Examples) {
  Rng rng(23);
  const Dataset ds(random_points(rng, 20, 2));
  const AnalyticalFlow one(ds, kLinear, std::vector<std::size_t>(20, 0), 1);
  for (int probe = 0; probe < 20; ++probe) {
    const Vector x = random_vector(rng, 2);
    const double t = rng.uniform(0.01, 1.0);
    EXPECT_LT((one.expert_flow(0, as_span(x), t) - one.marginal_flow(as_span(x), t))
                  .lpNorm<Eigen::Infinity>(),
              1e-12);
  }

  std::vector<std::size_t> assign(20, 0);
  assign[7] = 1;  // singleton cluster
  const AnalyticalFlow split(ds, kLinear, assign, 2);
  const Vector x = random_vector(rng, 2);
  const Vector u = split.expert_flow(1, as_span(x), 0.4);
  const Vector cond = conditional_flow(kLinear, as_span(x), ds.point(7), 0.4);
  EXPECT_LT((u - cond).lpNorm<Eigen::Infinity>(), 1e-12);

  const AnalyticalFlow with_empty(ds, kLinear, std::vector<std::size_t>(20, 0), 2);
  EXPECT_THROW(with_empty.expert_flow(1, as_span(x), 0.4), ArgumentError);
  const AnalyticalFlow unpartitioned(ds, kLinear);
  EXPECT_THROW(unpartitioned.expert_flow(0, as_span(x), 0.4), ArgumentError);
}

TEST(RouterPosterior, Examples) {
  const AnalyticalFlow one(line({-1.0, 0.5, 3.0}), kLinear, {0, 0, 0}, 1);
  EXPECT_DOUBLE_EQ(one.router_posterior(as_span(vec1(0.7)), 0.3)[0], 1.0);

  const AnalyticalFlow sym(line({-1.0, 1.0}), kLinear, {0, 1}, 2);
  for (double t : {0.01, 0.3, 0.9, 1.0}) {
    const Vector p = sym.router_posterior(as_span(vec1(0.0)), t);
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
  }
}

TEST(RouterPosterior, MatchesNaiveBayesRule) {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 40, k = 1 + rng.uniform_index(6);
    const Dataset ds(random_points(rng, n, 2, 1.0));
    const auto assign = random_assignment(rng, n, k);
    const AnalyticalFlow flow(ds, kLinear, assign, k);
    const Vector x = random_vector(rng, 2, 1.5);
    const double t = rng.uniform(0.4, 1.0);
    Vector joint = Vector::Zero(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      const double a = kLinear.alpha(t), s = kLinear.sigma(t);
      double sq = 0.0;
      for (int j = 0; j < 2; ++j) sq += std::pow(x[j] - a * ds.point(i)[j], 2);
      joint[static_cast<Eigen::Index>(assign[i])] +=
          std::exp(-sq / (2 * s * s)) / (2 * std::numbers::pi * s * s) / static_cast<double>(n);
    }
    const Vector naive = joint / joint.sum();
    EXPECT_LT((flow.router_posterior(as_span(x), t) - naive).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(MarginalScore, Examples) {
  const AnalyticalFlow single(line({0.0}), kLinear);
  EXPECT_NEAR(single.marginal_score(as_span(vec1(1.0)), 0.5)[0], -4.0, 1e-12);
  const AnalyticalFlow pair(line({-2.0, 2.0}), kLinear);
  EXPECT_NEAR(pair.marginal_score(as_span(vec1(0.0)), 0.7)[0], 0.0, 1e-14);
}

TEST(MarginalScore, MatchesFiniteDifferenceOfLogDensity) {
  Rng rng(31);
  for (const Schedule& s : {kLinear, kCosine}) {
    const AnalyticalFlow flow(Dataset(random_points(rng, 25, 3)), s);
    for (int probe = 0; probe < 20; ++probe) {
      Vector x = random_vector(rng, 3);
      const double t = rng.uniform(0.1, 1.0), h = 1e-5;
      const Vector score = flow.marginal_score(as_span(x), t);
      for (Eigen::Index j = 0; j < 3; ++j) {
        const double orig = x[j];
        x[j] = orig + h;
        const double up = flow.log_density(as_span(x), t);
        x[j] = orig - h;
        const double down = flow.log_density(as_span(x), t);
        x[j] = orig;
        EXPECT_NEAR(score[j], (up - down) / (2 * h), 1e-4);
      }
    }
  }
}

TEST(ClusterScoreDecomposition, Examples) {
  Rng rng(37);
  const Dataset ds(random_points(rng, 12, 2));
  const AnalyticalFlow one(ds, kLinear, std::vector<std::size_t>(12, 0), 1);
  const Vector x = random_vector(rng, 2);
  EXPECT_LT((one.cluster_score_decomposition(as_span(x), 0.6) - one.marginal_score(as_span(x), 0.6))
                .lpNorm<Eigen::Infinity>(),
            1e-12);

  // Singleton clusters: posterior-weighted single-Gaussian scores.
  std::vector<std::size_t> ids(12);
  for (std::size_t i = 0; i < 12; ++i) ids[i] = i;
  const AnalyticalFlow singles(ds, kLinear, ids, 12);
  const double t = 0.45;
  const Vector post = singles.router_posterior(as_span(x), t);
  Vector expected = Vector::Zero(2);
  for (std::size_t i = 0; i < 12; ++i) {
    Vector x0(2);
    x0 << ds.point(i)[0], ds.point(i)[1];
    expected += post[static_cast<Eigen::Index>(i)] *
                (-(x - kLinear.alpha(t) * x0) / (kLinear.sigma(t) * kLinear.sigma(t)));
  }
  EXPECT_LT((singles.cluster_score_decomposition(as_span(x), t) - expected)
                .lpNorm<Eigen::Infinity>(),
            1e-10);
}

TEST(FlowScoreConsistency, Examples) {
  Rng rng(41);
  const AnalyticalFlow single(line({1.3}), kLinear);
  for (int i = 0; i < 20; ++i) {
    EXPECT_LT(single.flow_score_consistency(as_span(vec1(rng.uniform(-3, 3))),
                                            rng.uniform(0.01, 0.99)),
              1e-10);
  }
  for (const Schedule& s : {kLinear, kCosine}) {
    for (int trial = 0; trial < 10; ++trial) {
      const AnalyticalFlow flow(Dataset(random_points(rng, 30, 2)), s);
      const Vector x = random_vector(rng, 2);
      EXPECT_LT(flow.flow_score_consistency(as_span(x), rng.uniform(0.1, 0.9)), 1e-8);
    }
  }
  EXPECT_THROW(single.flow_score_consistency(as_span(vec1(0.2)), 1.0), DomainError);
}

// Property: the router-weighted sum of expert flows (and of cluster scores)
// reproduces the marginal flow (and score) for arbitrary partitions.
TEST(DecompositionProperty, HoldsForRandomAndKMeansPartitions) {
  Rng rng(43);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(511);
    const std::size_t d = 1 + rng.uniform_index(8);
    const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(16, n));
    const Dataset ds(random_points(rng, n, d, 3.0));
    std::vector<std::size_t> assign;
    if (trial % 2 == 0) {
      assign = random_assignment(rng, n, k);
    } else {
      assign = kmeans(ds.points(), {k, rng.next_u64(), 50, 1e-8}).assignment;
    }
    const Schedule& s = trial % 3 == 0 ? kCosine : kLinear;
    const AnalyticalFlow flow(ds, s, assign, k);
    const auto members = members_by_cluster(assign, k);
    for (int probe = 0; probe < 15; ++probe) {
      const double t = probe < 5 ? 0.001 + 0.2 * probe : rng.uniform(0.001, 1.0);
      const Vector x = random_vector(rng, d, 4.0);
      const Vector post = flow.router_posterior(as_span(x), t);
      EXPECT_NEAR(post.sum(), 1.0, 1e-12);
      EXPECT_GE(post.minCoeff(), 0.0);
      EXPECT_LE(post.maxCoeff(), 1.0);
      Vector u = Vector::Zero(static_cast<Eigen::Index>(d)), sc = u;
      for (std::size_t c = 0; c < k; ++c) {
        if (members[c].empty()) continue;
        u += post[static_cast<Eigen::Index>(c)] * flow.expert_flow(c, as_span(x), t);
        sc += post[static_cast<Eigen::Index>(c)] * flow.cluster_score(c, as_span(x), t);
      }
      EXPECT_LT((u - flow.marginal_flow(as_span(x), t)).lpNorm<Eigen::Infinity>(), 1e-9);
      EXPECT_LT((flow.cluster_score_decomposition(as_span(x), t) -
                 flow.marginal_score(as_span(x), t))
                    .lpNorm<Eigen::Infinity>(),
                1e-9 * std::max(1.0, sc.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST(ConcentrationProperty, NearestPointDominatesAtSmallTime) {
  Rng rng(47);
  const double t = kDefaultTMin * 10;
  for (int trial = 0; trial < 10; ++trial) {
    // Points on a coarse lattice so the minimum spacing is far above 10 sigma_t.
    Matrix pts(16, 2);
    for (int i = 0; i < 16; ++i) {
      pts(i, 0) = (i % 4) * 1.0 + rng.uniform(-0.1, 0.1);
      pts(i, 1) = (i / 4) * 1.0 + rng.uniform(-0.1, 0.1);
    }
    const AnalyticalFlow flow(Dataset(pts), kLinear);
    const std::size_t target = rng.uniform_index(16);
    Vector x0(2);
    x0 << pts(static_cast<Eigen::Index>(target), 0), pts(static_cast<Eigen::Index>(target), 1);
    Vector eps(2);
    eps << rng.normal(), rng.normal();
    const Vector xt = kLinear.alpha(t) * x0 + kLinear.sigma(t) * eps;
    EXPECT_GT(flow.posterior_weights(as_span(xt), t)[static_cast<Eigen::Index>(target)], 0.99);
  }
}

TEST(PermutationProperty, RowOrderDoesNotMatter) {
  Rng rng(53);
  const std::size_t n = 40, k = 5;
  Matrix pts = random_points(rng, n, 3);
  Vector w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.1, 1.0);
  w /= w.sum();
  const auto assign = random_assignment(rng, n, k);
  const AnalyticalFlow flow(Dataset(pts, w), kLinear, assign, k);

  const auto perm = rng.permutation(n);
  Matrix pp(pts.rows(), pts.cols());
  Vector pw(w.size());
  std::vector<std::size_t> pa(n);
  for (std::size_t i = 0; i < n; ++i) {
    pp.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(perm[i]));
    pw[static_cast<Eigen::Index>(i)] = w[static_cast<Eigen::Index>(perm[i])];
    pa[i] = assign[perm[i]];
  }
  pw /= pw.sum();
  const AnalyticalFlow permuted(Dataset(pp, pw), kLinear, pa, k);
  for (int probe = 0; probe < 20; ++probe) {
    const Vector x = random_vector(rng, 3);
    const double t = rng.uniform(0.05, 1.0);
    auto diff = [](const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); };
    EXPECT_LT(diff(flow.marginal_flow(as_span(x), t), permuted.marginal_flow(as_span(x), t)), 1e-12);
    EXPECT_LT(diff(flow.router_posterior(as_span(x), t), permuted.router_posterior(as_span(x), t)),
              1e-12);
    EXPECT_LT(diff(flow.marginal_score(as_span(x), t), permuted.marginal_score(as_span(x), t)),
              1e-12);
    EXPECT_LT(diff(flow.expert_flow(2, as_span(x), t), permuted.expert_flow(2, as_span(x), t)),
              1e-12);
  }
}

TEST(AnalyticalFlow, ExtremeSmallTimeStaysFinite) {
  // Far from every point at t_min, naive Gaussian weights all underflow; the
  // log-space path must still return a finite field.
  const AnalyticalFlow flow(line({-1.0, 1.0}), kLinear, {0, 1}, 2);
  const Vector u = flow.marginal_flow(as_span(vec1(50.0)), kDefaultTMin);
  EXPECT_TRUE(u.allFinite());
  EXPECT_NEAR(flow.router_posterior(as_span(vec1(50.0)), kDefaultTMin)[1], 1.0, 1e-12);
}

}  // namespace
}  // namespace dfm
