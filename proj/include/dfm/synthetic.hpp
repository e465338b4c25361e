// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic datasets for desk-scale experiments.

#pragma once

#include <cstdint>
#include <string>

#include "dfm/dataset.hpp"

namespace dfm {

enum class SyntheticShape { kBlobs, kMoons, kSpiral, kCheckerboard };

const char* to_string(SyntheticShape s);
SyntheticShape synthetic_shape_from_string(const std::string& name);

struct SyntheticSpec {
  SyntheticShape shape = SyntheticShape::kBlobs;
  std::size_t n = 1000;
  std::size_t dim = 2;
  std::size_t num_blobs = 8;  // blobs only
  double separation = 10.0;   // distance between neighbouring blob centres
  double noise = 1.0;         // blob standard deviation / jitter scale for other shapes
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

// Blobs sit on a circle in the first two coordinates with neighbouring
// centres `separation` apart; point i belongs to blob i mod K and carries
// that label. Other shapes live in the first two coordinates, extra
// coordinates are N(0, noise^2), and carry no labels.
Dataset generate(const SyntheticSpec& spec);

struct Split {
  Dataset train;
  Dataset heldout;
};

// Random split with round(fraction * n) held-out points (at least one each
// side when n >= 2). Labels follow their points.
Split holdout_split(const Dataset& data, double fraction, const Rng& rng);

}  // namespace dfm
