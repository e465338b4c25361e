// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/analytical_flow.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dfm {

namespace {

double lse_over(std::span<const std::size_t> idx, const Vector& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i : idx) mx = std::max(mx, v[static_cast<Eigen::Index>(i)]);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (std::size_t i : idx) acc += std::exp(v[static_cast<Eigen::Index>(i)] - mx);
  return mx + std::log(acc);
}

[[noreturn]] void degenerate(const char* what, std::span<const double> x, double t) {
  double norm = 0.0;
  for (double v : x) norm += v * v;
  std::ostringstream os;
  os << what << ": every posterior weight underflowed (t = " << t
     << ", |x| = " << std::sqrt(norm) << ")";
  throw NumericalDegeneracyError(os.str());
}

}  // namespace

AnalyticalFlow::AnalyticalFlow(Dataset dataset, Schedule schedule)
    : dataset_(std::move(dataset)), schedule_(schedule) {
  log_q_ = dataset_.weights().array().log().matrix();
  all_.resize(dataset_.size());
  for (std::size_t i = 0; i < all_.size(); ++i) all_[i] = i;
}

AnalyticalFlow::AnalyticalFlow(Dataset dataset, Schedule schedule,
                               std::vector<std::size_t> assignment, std::size_t num_clusters)
    : AnalyticalFlow(std::move(dataset), schedule) {
  if (num_clusters == 0) throw ArgumentError("partition needs at least one cluster");
  if (assignment.size() != dataset_.size()) {
    throw ShapeError("partition assignment must have one entry per point");
  }
  members_ = members_by_cluster(assignment, num_clusters);
  assignment_ = std::move(assignment);
  num_clusters_ = num_clusters;
}

void AnalyticalFlow::check_point(std::span<const double> x, double t) const {
  schedule_.check_time(t);
  if (x.size() != dataset_.dim()) throw ShapeError("query point has wrong dimension");
}

void AnalyticalFlow::require_partition() const {
  if (!has_partition()) throw ArgumentError("analytical flow has no partition");
}

Vector AnalyticalFlow::log_joint(std::span<const double> x, double t) const {
  check_point(x, t);
  const double a = schedule_.alpha(t);
  const double var = schedule_.sigma(t) * schedule_.sigma(t);
  const double dim = static_cast<double>(dataset_.dim());
  const double norm = -0.5 * dim * std::log(2.0 * std::numbers::pi * var);
  const Matrix& pts = dataset_.points();
  Vector out(pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const double d = x[static_cast<std::size_t>(j)] - a * pts(i, j);
      sq += d * d;
    }
    out[i] = norm - sq / (2.0 * var) + log_q_[i];
  }
  return out;
}

double AnalyticalFlow::log_density(std::span<const double> x, double t) const {
  const Vector lj = log_joint(x, t);
  return lse_over(all_, lj);
}

Vector AnalyticalFlow::posterior_weights(std::span<const double> x, double t) const {
  const Vector lj = log_joint(x, t);
  const double mx = lj.maxCoeff();
  if (!std::isfinite(mx)) degenerate("posterior_weights", x, t);
  const Vector w = (lj.array() - mx).exp().matrix();
  return w / w.sum();
}

Vector AnalyticalFlow::weighted_field(std::span<const std::size_t> members,
                                      const Vector& lj, std::span<const double> x, double t,
                                      Field field) const {
  // Max-shifted weights normalized by their linear-space sum.
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i : members) mx = std::max(mx, lj[static_cast<Eigen::Index>(i)]);
  if (!std::isfinite(mx)) degenerate("analytical flow", x, t);
  const double a = schedule_.alpha(t), s = schedule_.sigma(t);
  const double ad = schedule_.alpha_dot(t), sd = schedule_.sigma_dot(t);
  const Matrix& pts = dataset_.points();
  const auto d = pts.cols();
  Vector out = Vector::Zero(d);
  double total = 0.0;
  for (std::size_t i : members) {
    const auto row = static_cast<Eigen::Index>(i);
    const double w = std::exp(lj[row] - mx);
    if (w == 0.0) continue;
    total += w;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x0 = pts(row, j);
      const double resid = x[static_cast<std::size_t>(j)] - a * x0;
      const double v = field == Field::kFlow ? ad * x0 + sd * resid / s : -resid / (s * s);
      out[j] += w * v;
    }
  }
  return out / total;
}

Vector AnalyticalFlow::marginal_flow(std::span<const double> x, double t) const {
  return weighted_field(all_, log_joint(x, t), x, t, Field::kFlow);
}

Vector AnalyticalFlow::expert_flow(std::size_t k, std::span<const double> x, double t) const {
  require_partition();
  if (k >= num_clusters_) throw ArgumentError("expert index out of range");
  if (members_[k].empty()) throw ArgumentError("expert cluster is empty");
  return weighted_field(members_[k], log_joint(x, t), x, t, Field::kFlow);
}

Vector AnalyticalFlow::router_posterior(std::span<const double> x, double t) const {
  require_partition();
  const Vector lj = log_joint(x, t);
  const double mx = lj.maxCoeff();
  if (!std::isfinite(mx)) degenerate("router_posterior", x, t);
  Vector mass = Vector::Zero(static_cast<Eigen::Index>(num_clusters_));
  for (Eigen::Index i = 0; i < lj.size(); ++i) {
    mass[static_cast<Eigen::Index>(assignment_[static_cast<std::size_t>(i)])] +=
        std::exp(lj[i] - mx);
  }
  return mass / mass.sum();
}

Vector AnalyticalFlow::marginal_score(std::span<const double> x, double t) const {
  return weighted_field(all_, log_joint(x, t), x, t, Field::kScore);
}

Vector AnalyticalFlow::cluster_score(std::size_t k, std::span<const double> x,
                                     double t) const {
  require_partition();
  if (k >= num_clusters_) throw ArgumentError("cluster index out of range");
  if (members_[k].empty()) throw ArgumentError("cluster is empty");
  return weighted_field(members_[k], log_joint(x, t), x, t, Field::kScore);
}

Vector AnalyticalFlow::cluster_score_decomposition(std::span<const double> x,
                                                   double t) const {
  const Vector post = router_posterior(x, t);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim()));
  for (std::size_t k = 0; k < num_clusters_; ++k) {
    const double p = post[static_cast<Eigen::Index>(k)];
    if (members_[k].empty() || p == 0.0) continue;
    out += p * cluster_score(k, x, t);
  }
  return out;
}

double AnalyticalFlow::flow_score_consistency(std::span<const double> x, double t) const {
  check_point(x, t);
  const double a = schedule_.alpha(t);
  if (std::abs(a) < 1e-12) throw DomainError("flow/score identity undefined where alpha(t) = 0");
  const double s = schedule_.sigma(t);
  const double ratio = schedule_.alpha_dot(t) / a;
  const Vector u = marginal_flow(x, t);
  const Vector score = marginal_score(x, t);
  Vector implied(static_cast<Eigen::Index>(dim()));
  for (std::size_t j = 0; j < dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    implied[jj] = ratio * x[j] - (schedule_.sigma_dot(t) * s - ratio * s * s) * score[jj];
  }
  return (u - implied).norm();
}

Matrix AnalyticalFlow::marginal_flow(const Matrix& x, double t) const {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = marginal_flow(row_span(x, i), t);
  return out;
}

Matrix AnalyticalFlow::expert_flow(std::size_t k, const Matrix& x, double t) const {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = expert_flow(k, row_span(x, i), t);
  return out;
}

Matrix AnalyticalFlow::router_posterior(const Matrix& x, double t) const {
  Matrix out(x.rows(), static_cast<Eigen::Index>(num_clusters_));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = router_posterior(row_span(x, i), t);
  return out;
}

}  // namespace dfm
