// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dfm {

namespace {

void check_pair(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() == 0 || b.rows() == 0) throw ArgumentError(std::string(what) + ": empty point set");
  if (a.cols() != b.cols()) throw ShapeError(std::string(what) + ": dimension mismatch");
}

}  // namespace

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("wasserstein_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  // Walk the merged quantile breakpoints i/n and j/m.
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next_a = static_cast<double>(i + 1) / n;
    const double next_b = static_cast<double>(j + 1) / m;
    const double next = std::min(next_a, next_b);
    const double diff = a[i] - b[j];
    acc += diff * diff * (next - u);
    u = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return std::sqrt(std::max(acc, 0.0));
}

double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t n_projections,
                          const Rng& rng) {
  check_pair(a, b, "sliced_wasserstein");
  if (n_projections == 0) throw ArgumentError("sliced_wasserstein: need at least one projection");
  Rng dirs = rng.split("projections");
  const auto d = a.cols();
  double total = 0.0;
  for (std::size_t p = 0; p < n_projections; ++p) {
    Vector theta(d);
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < d; ++j) theta[j] = dirs.normal();
      norm = theta.norm();
    } while (norm == 0.0);
    theta /= norm;
    const Vector pa = a * theta;
    const Vector pb = b * theta;
    total += wasserstein_1d({pa.begin(), pa.end()}, {pb.begin(), pb.end()});
  }
  return total / static_cast<double>(n_projections);
}

namespace {

double mean_pair_distance(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) row += (a.row(i) - b.row(j)).norm();
    acc += row;
  }
  return acc / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const Matrix& a, const Matrix& b) {
  check_pair(a, b, "energy_distance");
  const double ab = mean_pair_distance(a, b);
  const double ba = mean_pair_distance(b, a);
  const double aa = mean_pair_distance(a, a);
  const double bb = mean_pair_distance(b, b);
  // Pairing the sums keeps the result exactly symmetric in its arguments.
  return std::max(0.0, (ab + ba) - (aa + bb));
}

SeedMatch seed_match_score(const Matrix& a, const Matrix& b, const Rng& rng) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("seed_match_score: sample sets differ in shape");
  }
  if (a.rows() == 0) throw ArgumentError("seed_match_score: no samples");
  Rng pairing = rng.split("pairing");
  const auto perm = pairing.permutation(static_cast<std::size_t>(a.rows()));
  SeedMatch s;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    s.matched_mean_dist += (a.row(i) - b.row(i)).norm();
    s.random_mean_dist += (a.row(i) - b.row(static_cast<Eigen::Index>(perm[i]))).norm();
  }
  s.matched_mean_dist /= static_cast<double>(a.rows());
  s.random_mean_dist /= static_cast<double>(a.rows());
  return s;
}

SeedMatch seed_match_score(const FieldFn& field_a, const FieldFn& field_b, std::size_t dim,
                           const SamplerConfig& sampler, std::size_t n, const Rng& rng) {
  const Matrix a = sample_field(field_a, dim, n, sampler, rng).samples;
  const Matrix b = sample_field(field_b, dim, n, sampler, rng).samples;
  return seed_match_score(a, b, rng);
}

ProbeSet forward_probes(const Dataset& data, const Schedule& schedule, std::span<const double> ts,
                        std::size_t per_t, const Rng& rng) {
  if (data.size() == 0) throw ArgumentError("forward_probes: empty dataset");
  Rng r = rng.split("probes");
  ProbeSet out;
  const auto d = static_cast<Eigen::Index>(data.dim());
  for (double t : ts) {
    schedule.check_time(t);
    Matrix x(static_cast<Eigen::Index>(per_t), d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto x0 = data.point(r.uniform_index(data.size()));
      for (Eigen::Index j = 0; j < d; ++j) {
        x(i, j) = schedule.alpha(t) * x0[static_cast<std::size_t>(j)] + schedule.sigma(t) * r.normal();
      }
    }
    out.t.push_back(t);
    out.x.push_back(std::move(x));
  }
  return out;
}

double flow_rms(const FieldFn& a, const FieldFn& b, const ProbeSet& probes) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < probes.t.size(); ++p) {
    const Matrix diff = a(probes.x[p], probes.t[p], p) - b(probes.x[p], probes.t[p], p);
    acc += diff.squaredNorm();
    count += static_cast<std::size_t>(diff.rows());
  }
  if (count == 0) throw ArgumentError("flow_rms: no probe points");
  return std::sqrt(acc / static_cast<double>(count));
}

double mean_router_kl(const RouterModel& truth, const RouterModel& model, const ProbeSet& probes) {
  if (truth.num_experts() != model.num_experts()) {
    throw ShapeError("mean_router_kl: routers disagree on K");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < probes.t.size(); ++p) {
    const Matrix pt = truth.probabilities(probes.x[p], probes.t[p]);
    const Matrix pm = model.probabilities(probes.x[p], probes.t[p]);
    for (Eigen::Index i = 0; i < pt.rows(); ++i) {
      for (Eigen::Index k = 0; k < pt.cols(); ++k) {
        const double a = pt(i, k);
        if (a > 0.0) acc += a * (std::log(a) - std::log(std::max(pm(i, k), 1e-300)));
      }
      ++count;
    }
  }
  if (count == 0) throw ArgumentError("mean_router_kl: no probe points");
  return acc / static_cast<double>(count);
}

}  // namespace dfm
