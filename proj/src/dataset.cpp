// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace dfm {

Dataset::Dataset(Matrix points, std::optional<std::vector<std::size_t>> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  const auto n = points_.rows();
  weights_ = Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  validate();
}

Dataset::Dataset(Matrix points, Vector weights, std::optional<std::vector<std::size_t>> labels)
    : points_(std::move(points)), weights_(std::move(weights)), labels_(std::move(labels)) {
  validate();
}

void Dataset::validate() const {
  if (points_.rows() == 0) throw ArgumentError("dataset must contain at least one point");
  if (weights_.size() != points_.rows()) throw ShapeError("dataset: one weight per point");
  if (!points_.allFinite()) throw ArgumentError("dataset contains non-finite coordinates");
  if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
    throw ArgumentError("dataset weights must be finite and nonnegative");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw ArgumentError("dataset weights must sum to one");
  }
  if (labels_ && labels_->size() != size()) throw ShapeError("dataset: one label per point");
}

const std::vector<std::size_t>& Dataset::labels() const {
  if (!labels_) throw ArgumentError("dataset has no labels");
  return *labels_;
}

std::size_t Dataset::num_labels() const {
  if (!labels_ || labels_->empty()) return 0;
  return *std::max_element(labels_->begin(), labels_->end()) + 1;
}

Dataset Dataset::with_labels(std::vector<std::size_t> labels) const {
  return Dataset(points_, weights_, std::move(labels));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ArgumentError("subset: empty index set");
  Matrix pts(static_cast<Eigen::Index>(indices.size()), points_.cols());
  Vector w(static_cast<Eigen::Index>(indices.size()));
  std::optional<std::vector<std::size_t>> lab;
  if (labels_) lab.emplace();
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(indices[j]);
    if (indices[j] >= size()) throw ArgumentError("subset: index out of range");
    pts.row(static_cast<Eigen::Index>(j)) = points_.row(i);
    w[static_cast<Eigen::Index>(j)] = weights_[i];
    if (lab) lab->push_back((*labels_)[indices[j]]);
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw ArgumentError("subset has zero total weight");
  w /= total;
  return Dataset(std::move(pts), std::move(w), std::move(lab));
}

std::vector<std::vector<std::size_t>> members_by_cluster(
    std::span<const std::size_t> assignment, std::size_t num_clusters) {
  std::vector<std::vector<std::size_t>> members(num_clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= num_clusters) throw ArgumentError("cluster index out of range");
    members[assignment[i]].push_back(i);
  }
  return members;
}

}  // namespace dfm
