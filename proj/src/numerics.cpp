// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace dfm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kNumericalDegeneracy: return "numerical-degeneracy";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kSampling: return "sampling";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kWorkerFailure: return "worker-failure";
  }
  return "unknown";
}

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : Rng(seed, mix64(seed ^ 0x5eed5eed5eed5eedULL)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ArgumentError("uniform_index: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[uniform_index(i)]);
  }
  return perm;
}

Rng Rng::split(std::string_view label) const {
  return Rng(seed_, mix64(key_ ^ mix64(fnv1a64(label))));
}

Rng Rng::split(std::uint64_t index) const {
  return Rng(seed_, mix64(key_ ^ mix64(index * kGolden + 0x1234567ULL)));
}

void fill_normal(Rng& rng, Eigen::Ref<Matrix> out) {
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = rng.normal();
  }
}

void require_same_shape(Eigen::Index a_rows, Eigen::Index a_cols, Eigen::Index b_rows,
                        Eigen::Index b_cols, const char* what) {
  if (a_rows != b_rows || a_cols != b_cols) {
    std::ostringstream os;
    os << what << ": shape mismatch (" << a_rows << "x" << a_cols << " vs " << b_rows
       << "x" << b_cols << ")";
    throw ShapeError(os.str());
  }
}

double gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                        double var) {
  if (!(var > 0.0)) throw DomainError("gaussian_log_pdf: variance must be positive");
  if (x.size() != mean.size()) throw ShapeError("gaussian_log_pdf: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    sq += d * d;
  }
  const double dim = static_cast<double>(x.size());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("log_sum_exp: empty input");
  const double mx = *std::max_element(values.begin(), values.end());
  if (std::isinf(mx)) return mx;  // all -inf, or a +inf dominates
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

}  // namespace dfm
