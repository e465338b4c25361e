// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sample-set distances used in place of FID, and the seed-matching test.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfm/dataset.hpp"
#include "dfm/numerics.hpp"
#include "dfm/sampler.hpp"

namespace dfm {

// Mean over random unit directions of the 1D 2-Wasserstein distance between
// the projected empirical distributions. Sets may differ in size; the 1D
// distance integrates the squared quantile difference over merged breakpoints.
double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t n_projections,
                          const Rng& rng);

// Exact 1D 2-Wasserstein distance between two empirical samples.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// 2 E|X - Y| - E|X - X'| - E|Y - Y'| over all pairs (V-statistic, so >= 0).
double energy_distance(const Matrix& a, const Matrix& b);

struct SeedMatch {
  double matched_mean_dist = 0.0;
  double random_mean_dist = 0.0;
};

// a and b generated from identical noise; random pairing uses rng.split("pairing").
SeedMatch seed_match_score(const Matrix& a, const Matrix& b, const Rng& rng);
SeedMatch seed_match_score(const FieldFn& field_a, const FieldFn& field_b, std::size_t dim,
                           const SamplerConfig& sampler, std::size_t n, const Rng& rng);

// Forward-process probe points: for each t, `per_t` rows
// alpha(t) x0 + sigma(t) eps with x0 drawn uniformly from the data.
struct ProbeSet {
  std::vector<double> t;
  std::vector<Matrix> x;
};

ProbeSet forward_probes(const Dataset& data, const Schedule& schedule, std::span<const double> ts,
                        std::size_t per_t, const Rng& rng);

// sqrt(mean over probes of ||a(x, t) - b(x, t)||^2).
double flow_rms(const FieldFn& a, const FieldFn& b, const ProbeSet& probes);

// Mean KL(truth || model) over probes.
double mean_router_kl(const RouterModel& truth, const RouterModel& model, const ProbeSet& probes);

}  // namespace dfm
