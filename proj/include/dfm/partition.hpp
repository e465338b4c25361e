// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// K-way disjoint data partitions: two-stage k-means (many fine centroids
// consolidated into K coarse ones) and a random-assignment baseline.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfm/numerics.hpp"

namespace dfm {

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-8;
  // Independent k-means++ starts; the lowest final cost wins.
  std::size_t restarts = 4;
};

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> counts;  // total weight per cluster
  // Weighted cost after each assignment step; the last entry matches the
  // returned centroids and assignment.
  std::vector<double> cost_history;
  std::size_t iterations = 0;

  double cost() const { return cost_history.back(); }
};

// Weighted Lloyd's algorithm with k-means++ seeding and restarts. Empty weights mean
// unit weight per point. Ties go to the lower centroid index.
KMeansResult kmeans(const Matrix& points, const KMeansOptions& options,
                    std::span<const double> weights = {});

double kmeans_cost(const Matrix& points, const Matrix& centroids,
                   std::span<const std::size_t> assignment,
                   std::span<const double> weights = {});

std::size_t nearest_centroid(std::span<const double> point, const Matrix& centroids);

enum class PartitionMode { kFeatureKMeans, kRandom };

const char* to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& name);

struct PartitionSpec {
  std::size_t num_clusters = 1;     // K
  std::size_t fine_clusters = 64;   // M
  std::size_t max_iters = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  PartitionMode mode = PartitionMode::kFeatureKMeans;

  // 1 <= K <= M <= n and tol > 0; M is clamped to n for small datasets.
  void validate(std::size_t n) const;
};

struct Partition {
  std::size_t num_clusters = 0;
  std::vector<std::size_t> assignment;
  Matrix coarse_centroids;  // K x d_feat (cluster means for random mode)
  Matrix fine_centroids;    // M x d_feat (empty for random mode)
  std::vector<std::size_t> counts;
  PartitionSpec spec;

  std::vector<std::vector<std::size_t>> members() const;
};

Partition two_stage_partition(const Matrix& features, const PartitionSpec& spec);
Partition random_partition(std::size_t n, std::size_t num_clusters, std::uint64_t seed);
// Dispatches on spec.mode; random partitions get coarse centroids as cluster means.
Partition make_partition(const Matrix& features, const PartitionSpec& spec);

}  // namespace dfm
