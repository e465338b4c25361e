// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact flows, posteriors and scores of the Gaussian probability path over a
// discrete weighted dataset. These are the oracles every learned component
// is judged against.
//
// With p_t(x | x0) = N(alpha x0, sigma^2 I) and data weights q:
//   marginal flow   u(x)   = sum_i w_i u(x | x0_i),   w_i ∝ p_t(x | x0_i) q_i
//   expert flow     u_k(x) = same sum restricted to cluster k
//   router          r_k(x) = p_{t,S_k}(x) / p_t(x)
// so that u = sum_k r_k u_k exactly. All weights are normalized in log space.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfm/dataset.hpp"
#include "dfm/schedule.hpp"

namespace dfm {

class AnalyticalFlow {
 public:
  AnalyticalFlow(Dataset dataset, Schedule schedule);
  // assignment[i] in [0, num_clusters) gives the cluster of point i.
  AnalyticalFlow(Dataset dataset, Schedule schedule, std::vector<std::size_t> assignment,
                 std::size_t num_clusters);

  const Dataset& dataset() const { return dataset_; }
  const Schedule& schedule() const { return schedule_; }
  std::size_t dim() const { return dataset_.dim(); }
  bool has_partition() const { return num_clusters_ > 0; }
  std::size_t num_clusters() const { return num_clusters_; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  // log p_t(x | x0_i) + log q_i for every point.
  Vector log_joint(std::span<const double> x, double t) const;
  // log p_t(x).
  double log_density(std::span<const double> x, double t) const;
  // Normalized posterior weights over data points.
  Vector posterior_weights(std::span<const double> x, double t) const;

  Vector marginal_flow(std::span<const double> x, double t) const;
  Vector expert_flow(std::size_t k, std::span<const double> x, double t) const;
  Vector router_posterior(std::span<const double> x, double t) const;

  Vector marginal_score(std::span<const double> x, double t) const;
  // grad log p_t(x | v = k).
  Vector cluster_score(std::size_t k, std::span<const double> x, double t) const;
  // sum_k p(v = k | x) grad log p_t(x | v = k).
  Vector cluster_score_decomposition(std::span<const double> x, double t) const;

  // || u(x) - [(a'/a) x - (s' s - (a'/a) s^2) score(x)] ||; alpha(t) must be nonzero.
  // Follows from E[eps | x] = -sigma score(x).
  double flow_score_consistency(std::span<const double> x, double t) const;

  // Row-wise batch versions.
  Matrix marginal_flow(const Matrix& x, double t) const;
  Matrix expert_flow(std::size_t k, const Matrix& x, double t) const;
  Matrix router_posterior(const Matrix& x, double t) const;

 private:
  enum class Field { kFlow, kScore };

  void check_point(std::span<const double> x, double t) const;
  void require_partition() const;
  Vector weighted_field(std::span<const std::size_t> members, const Vector& log_joint,
                        std::span<const double> x, double t, Field field) const;

  Dataset dataset_;
  Schedule schedule_;
  Vector log_q_;
  std::size_t num_clusters_ = 0;
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> all_;
};

}  // namespace dfm
