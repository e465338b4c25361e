// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dfm/io.hpp"

namespace dfm {

const char* to_string(SyntheticShape s) {
  switch (s) {
    case SyntheticShape::kBlobs: return "blobs";
    case SyntheticShape::kMoons: return "moons";
    case SyntheticShape::kSpiral: return "spiral";
    case SyntheticShape::kCheckerboard: return "checkerboard";
  }
  return "unknown";
}

SyntheticShape synthetic_shape_from_string(const std::string& name) {
  if (name == "blobs") return SyntheticShape::kBlobs;
  if (name == "moons") return SyntheticShape::kMoons;
  if (name == "spiral") return SyntheticShape::kSpiral;
  if (name == "checkerboard") return SyntheticShape::kCheckerboard;
  throw UsageError("unknown dataset shape '" + name +
                   "' (expected blobs, moons, spiral or checkerboard)");
}

void SyntheticSpec::validate() const {
  if (n == 0) throw ArgumentError("synthetic: n must be at least 1");
  if (shape == SyntheticShape::kBlobs) {
    if (dim == 0) throw ArgumentError("synthetic: dim must be at least 1");
    if (num_blobs == 0) throw ArgumentError("synthetic: need at least one blob");
  } else if (dim < 2) {
    throw ArgumentError(std::string("synthetic: ") + to_string(shape) + " needs dim >= 2");
  }
  if (!(noise >= 0.0) || !(separation >= 0.0)) {
    throw ArgumentError("synthetic: noise and separation must be nonnegative");
  }
}

std::string SyntheticSpec::describe() const {
  std::ostringstream os;
  os << "shape=" << to_string(shape) << ";n=" << n << ";dim=" << dim << ";blobs=" << num_blobs
     << ";separation=" << format_double(separation) << ";noise=" << format_double(noise)
     << ";seed=" << seed;
  return os.str();
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = Rng(spec.seed).split("synthetic");
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Matrix pts = Matrix::Zero(n, d);
  const double pi = std::numbers::pi;

  if (spec.shape == SyntheticShape::kBlobs) {
    const std::size_t k = spec.num_blobs;
    const double radius = k > 1 ? spec.separation / (2.0 * std::sin(pi / static_cast<double>(k)))
                                : 0.0;
    std::vector<std::size_t> labels(spec.n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t label = static_cast<std::size_t>(i) % k;
      labels[static_cast<std::size_t>(i)] = label;
      const double angle = 2.0 * pi * static_cast<double>(label) / static_cast<double>(k);
      for (Eigen::Index j = 0; j < d; ++j) pts(i, j) = spec.noise * rng.normal();
      if (d >= 2) {
        pts(i, 0) += radius * std::cos(angle);
        pts(i, 1) += radius * std::sin(angle);
      } else {
        pts(i, 0) += spec.separation * static_cast<double>(label);
      }
    }
    return Dataset(std::move(pts), std::move(labels));
  }

  const double jitter = 0.1 * spec.noise;
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    switch (spec.shape) {
      case SyntheticShape::kMoons: {
        const double a = pi * rng.uniform();
        if (i % 2 == 0) {
          x = std::cos(a);
          y = std::sin(a);
        } else {
          x = 1.0 - std::cos(a);
          y = 0.5 - std::sin(a);
        }
        break;
      }
      case SyntheticShape::kSpiral: {
        const double r = rng.uniform();
        const double a = 3.0 * pi * r + (i % 2 == 0 ? 0.0 : pi);
        x = 2.0 * r * std::cos(a);
        y = 2.0 * r * std::sin(a);
        break;
      }
      case SyntheticShape::kCheckerboard: {
        // 4 x 4 board on [-2, 2]^2, filled squares only.
        do {
          x = rng.uniform(-2.0, 2.0);
          y = rng.uniform(-2.0, 2.0);
        } while (((static_cast<int>(std::floor(x)) + static_cast<int>(std::floor(y))) & 1) != 0);
        break;
      }
      case SyntheticShape::kBlobs: break;
    }
    pts(i, 0) = x + jitter * rng.normal();
    pts(i, 1) = y + jitter * rng.normal();
    for (Eigen::Index j = 2; j < d; ++j) pts(i, j) = spec.noise * rng.normal();
  }
  return Dataset(std::move(pts));
}

Split holdout_split(const Dataset& data, double fraction, const Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ArgumentError("holdout fraction in [0, 1)");
  const std::size_t n = data.size();
  std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2) held = std::clamp<std::size_t>(held, 1, n - 1);
  if (held >= n) held = n - 1;
  Rng r = rng.split("holdout");
  const auto perm = r.permutation(n);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  Split s{data.subset(train), Dataset()};
  if (!test.empty()) s.heldout = data.subset(test);
  return s;
}

}  // namespace dfm
