// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dfm {

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

double weight_of(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

// k-means++: first centroid by weight, then proportional to weight * D^2.
Matrix seed_plus_plus(const Matrix& points, std::span<const double> weights, std::size_t k,
                      Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto draw = [&](auto&& mass) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += mass(i);
    if (!(total > 0.0)) return rng.uniform_index(n);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < n; ++i) {
      u -= mass(i);
      if (u < 0.0) return i;
    }
    // Rounding left u >= 0: take the last point with positive mass.
    for (std::size_t i = n; i-- > 0;) {
      if (mass(i) > 0.0) return i;
    }
    return n - 1;
  };

  std::size_t first = draw([&](std::size_t i) { return weight_of(weights, i); });
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  for (std::size_t c = 1; c <= k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points, static_cast<Eigen::Index>(i), centroids,
                                      static_cast<Eigen::Index>(c - 1)));
    }
    if (c == k) break;
    const std::size_t next = draw([&](std::size_t i) { return weight_of(weights, i) * d2[i]; });
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(next));
  }
  return centroids;
}

double assign_all(const Matrix& points, const Matrix& centroids,
                  std::span<const double> weights, std::vector<std::size_t>& assignment) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = sq_dist(points, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::size_t>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
    cost += weight_of(weights, static_cast<std::size_t>(i)) * best_d;
  }
  return cost;
}

}  // namespace

std::size_t nearest_centroid(std::span<const double> point, const Matrix& centroids) {
  if (static_cast<Eigen::Index>(point.size()) != centroids.cols()) {
    throw ShapeError("nearest_centroid: dimension mismatch");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < centroids.cols(); ++j) {
      const double diff = point[static_cast<std::size_t>(j)] - centroids(c, j);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

double kmeans_cost(const Matrix& points, const Matrix& centroids,
                   std::span<const std::size_t> assignment, std::span<const double> weights) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)]);
    cost += weight_of(weights, static_cast<std::size_t>(i)) * sq_dist(points, i, centroids, c);
  }
  return cost;
}

namespace {

KMeansResult lloyd(const Matrix& points, std::span<const double> weights,
                   const KMeansOptions& options, Rng rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  const std::size_t k = options.k;
  KMeansResult r;
  r.centroids = seed_plus_plus(points, weights, k, rng);
  r.assignment.assign(n, 0);
  r.cost_history.push_back(assign_all(points, r.centroids, weights, r.assignment));

  const auto d = points.cols();
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), d);
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weight_of(weights, i);
      sums.row(static_cast<Eigen::Index>(r.assignment[i])) +=
          w * points.row(static_cast<Eigen::Index>(i));
      mass[r.assignment[i]] += w;
    }
    Matrix next = r.centroids;
    std::vector<std::size_t> empty;
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] > 0.0) {
        next.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / mass[c];
      } else {
        empty.push_back(c);
      }
    }
    // Empty clusters are reseeded at the points farthest from their centroid.
    std::vector<bool> taken(n, false);
    for (std::size_t c : empty) {
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || weight_of(weights, i) <= 0.0) continue;
        const double di = sq_dist(points, static_cast<Eigen::Index>(i), next,
                                  static_cast<Eigen::Index>(r.assignment[i]));
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      if (far == n) break;
      taken[far] = true;
      next.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
    }
    const double shift = (next - r.centroids).rowwise().norm().maxCoeff();
    r.centroids = std::move(next);
    r.cost_history.push_back(assign_all(points, r.centroids, weights, r.assignment));
    r.iterations = iter + 1;
    if (shift < options.tol) break;
  }
  r.counts.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) r.counts[r.assignment[i]] += weight_of(weights, i);
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, const KMeansOptions& options,
                    std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(points.rows());
  const std::size_t k = options.k;
  if (k == 0) throw ArgumentError("kmeans: K must be positive");
  if (k > n) {
    std::ostringstream os;
    os << "kmeans: K = " << k << " exceeds the number of points " << n;
    throw ArgumentError(os.str());
  }
  if (!weights.empty() && weights.size() != n) throw ShapeError("kmeans: one weight per point");
  if (!points.allFinite()) throw ArgumentError("kmeans: non-finite points");
  if (!(options.tol > 0.0)) throw ArgumentError("kmeans: tol must be positive");

  if (options.restarts == 0) throw ArgumentError("kmeans: restarts must be positive");

  KMeansResult best = lloyd(points, weights, options, Rng(options.seed));
  for (std::size_t r = 1; r < options.restarts; ++r) {
    KMeansResult next = lloyd(points, weights, options, Rng(options.seed).split(r));
    if (next.cost() < best.cost()) best = std::move(next);
  }
  return best;
}

const char* to_string(PartitionMode mode) {
  return mode == PartitionMode::kFeatureKMeans ? "feature-kmeans" : "random";
}

PartitionMode partition_mode_from_string(const std::string& name) {
  if (name == "feature-kmeans" || name == "kmeans") return PartitionMode::kFeatureKMeans;
  if (name == "random") return PartitionMode::kRandom;
  throw ArgumentError("unknown partition mode '" + name + "'");
}

void PartitionSpec::validate(std::size_t n) const {
  if (num_clusters == 0) throw ArgumentError("partition: K must be at least 1");
  if (num_clusters > n) {
    std::ostringstream os;
    os << "partition: K = " << num_clusters << " exceeds dataset size " << n;
    throw ArgumentError(os.str());
  }
  if (mode == PartitionMode::kFeatureKMeans && fine_clusters < num_clusters) {
    throw ArgumentError("partition: fine centroid count M must be >= K");
  }
  if (!(tol > 0.0)) throw ArgumentError("partition: tol must be positive");
}

std::vector<std::vector<std::size_t>> Partition::members() const {
  std::vector<std::vector<std::size_t>> m(num_clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) m[assignment[i]].push_back(i);
  return m;
}

namespace {

std::vector<std::size_t> count_clusters(std::span<const std::size_t> assignment, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : assignment) ++counts[a];
  return counts;
}

Matrix cluster_means(const Matrix& features, std::span<const std::size_t> assignment,
                     std::size_t k) {
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(k), features.cols());
  const auto counts = count_clusters(assignment, k);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    means.row(static_cast<Eigen::Index>(assignment[i])) +=
        features.row(static_cast<Eigen::Index>(i));
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  return means;
}

}  // namespace

Partition two_stage_partition(const Matrix& features, const PartitionSpec& spec) {
  const auto n = static_cast<std::size_t>(features.rows());
  spec.validate(n);
  Partition p;
  p.spec = spec;
  p.spec.mode = PartitionMode::kFeatureKMeans;
  p.spec.fine_clusters = std::min(spec.fine_clusters, n);
  p.num_clusters = spec.num_clusters;

  Rng seeds(spec.seed);
  KMeansOptions fine_opts{p.spec.fine_clusters, spec.seed, spec.max_iters, spec.tol};
  KMeansResult fine = kmeans(features, fine_opts);
  p.fine_centroids = fine.centroids;

  if (p.spec.fine_clusters == spec.num_clusters) {
    p.coarse_centroids = fine.centroids;
    p.assignment = fine.assignment;
  } else {
    KMeansOptions coarse_opts{spec.num_clusters, seeds.split("coarse").next_u64(),
                              spec.max_iters, spec.tol};
    KMeansResult coarse = kmeans(fine.centroids, coarse_opts, fine.counts);
    p.coarse_centroids = coarse.centroids;
    p.assignment.assign(n, 0);
    assign_all(features, p.coarse_centroids, {}, p.assignment);
  }

  // A coarse centroid can end up nearest to no data point; move it onto the
  // point farthest from its own centroid and reassign.
  for (std::size_t attempt = 0; attempt <= n; ++attempt) {
    p.counts = count_clusters(p.assignment, p.num_clusters);
    auto empty = std::find(p.counts.begin(), p.counts.end(), 0);
    if (empty == p.counts.end()) return p;
    std::size_t far = n;
    double far_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p.counts[p.assignment[i]] < 2) continue;
      const double di = sq_dist(features, static_cast<Eigen::Index>(i), p.coarse_centroids,
                                static_cast<Eigen::Index>(p.assignment[i]));
      if (di > far_d) {
        far_d = di;
        far = i;
      }
    }
    if (far == n) break;
    p.coarse_centroids.row(empty - p.counts.begin()) =
        features.row(static_cast<Eigen::Index>(far));
    assign_all(features, p.coarse_centroids, {}, p.assignment);
  }
  throw ArgumentError("partition: could not produce K nonempty clusters (too few distinct points)");
}

Partition random_partition(std::size_t n, std::size_t num_clusters, std::uint64_t seed) {
  if (num_clusters == 0) throw ArgumentError("random_partition: K must be at least 1");
  if (num_clusters > n) throw ArgumentError("random_partition: K exceeds dataset size");
  Partition p;
  p.num_clusters = num_clusters;
  p.spec.num_clusters = num_clusters;
  p.spec.fine_clusters = num_clusters;
  p.spec.seed = seed;
  p.spec.mode = PartitionMode::kRandom;
  Rng rng = Rng(seed).split("random-partition");
  p.assignment.resize(n);
  for (auto& a : p.assignment) a = rng.uniform_index(num_clusters);
  p.counts = count_clusters(p.assignment, num_clusters);
  // Empty clusters take a uniformly drawn point from a cluster that can spare one.
  for (std::size_t c = 0; c < num_clusters; ++c) {
    while (p.counts[c] == 0) {
      const std::size_t i = rng.uniform_index(n);
      if (p.counts[p.assignment[i]] < 2) continue;
      --p.counts[p.assignment[i]];
      p.assignment[i] = c;
      ++p.counts[c];
    }
  }
  return p;
}

Partition make_partition(const Matrix& features, const PartitionSpec& spec) {
  const auto n = static_cast<std::size_t>(features.rows());
  spec.validate(n);
  if (spec.mode == PartitionMode::kFeatureKMeans) return two_stage_partition(features, spec);
  Partition p = random_partition(n, spec.num_clusters, spec.seed);
  p.spec = spec;
  p.coarse_centroids = cluster_means(features, p.assignment, p.num_clusters);
  return p;
}

}  // namespace dfm
