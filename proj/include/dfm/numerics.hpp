// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Numeric substrate shared by every module: dense types, a counter-based
// splittable RNG, and log-space Gaussian helpers.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dfm/errors.hpp"

namespace dfm {

using Vector = Eigen::VectorXd;
// Points are stored one per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Counter-based generator: draw n is a pure function of (key, n), so streams
// are reproducible on every platform and split() never touches the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (one output per two uniforms).
  double normal();
  // Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  std::vector<std::size_t> permutation(std::size_t n);

  Rng split(std::string_view label) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

void fill_normal(Rng& rng, Eigen::Ref<Matrix> out);

// log N(x; mean, var * I).
double gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                        double var);

// ln sum exp(v_i) in max-shifted form. Returns -inf when every input is -inf.
double log_sum_exp(std::span<const double> values);

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline std::span<const double> row_span(const Matrix& m, Eigen::Index row) {
  return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

void require_same_shape(Eigen::Index a_rows, Eigen::Index a_cols, Eigen::Index b_rows,
                        Eigen::Index b_cols, const char* what);

}  // namespace dfm
