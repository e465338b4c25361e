// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dfm/numerics.hpp"

namespace dfm {

// Weighted points in R^d with optional cluster labels.
class Dataset {
 public:
  Dataset() = default;
  // Uniform weights 1/N.
  explicit Dataset(Matrix points, std::optional<std::vector<std::size_t>> labels = {});
  Dataset(Matrix points, Vector weights,
          std::optional<std::vector<std::size_t>> labels = {});

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }

  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  std::span<const double> point(std::size_t i) const {
    return row_span(points_, static_cast<Eigen::Index>(i));
  }

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<std::size_t>& labels() const;
  std::size_t num_labels() const;  // max label + 1, 0 without labels

  Dataset with_labels(std::vector<std::size_t> labels) const;
  // Rows at the given indices, weights renormalized to sum to one.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  void validate() const;

  Matrix points_;
  Vector weights_;
  std::optional<std::vector<std::size_t>> labels_;
};

std::vector<std::vector<std::size_t>> members_by_cluster(
    std::span<const std::size_t> assignment, std::size_t num_clusters);

}  // namespace dfm
