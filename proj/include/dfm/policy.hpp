// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-time expert selection rules applied to router probabilities.

#pragma once

#include <cstddef>
#include <string>

#include "dfm/numerics.hpp"

namespace dfm {

enum class Strategy { kFull, kTopK, kSample, kNucleus, kThreshold, kOracleLabel, kMonolithBypass };

struct EnsemblePolicy {
  Strategy strategy = Strategy::kFull;
  std::size_t k = 1;           // TopK
  std::size_t n_active = 1;    // Sample
  double temperature = 1.0;    // Sample, Nucleus
  double p = 0.9;              // Nucleus
  double tau = 0.0;            // Threshold
  std::size_t label = 0;       // OracleLabel; samplers override per trajectory

  static EnsemblePolicy full();
  static EnsemblePolicy top_k(std::size_t k);
  static EnsemblePolicy sample(std::size_t n_active, double temperature = 1.0);
  static EnsemblePolicy nucleus(double p, double temperature = 1.0);
  static EnsemblePolicy threshold(double tau);
  static EnsemblePolicy oracle(std::size_t label = 0);
  static EnsemblePolicy monolith();

  bool stochastic() const {
    return strategy == Strategy::kSample || strategy == Strategy::kNucleus;
  }
  bool uses_router() const {
    return strategy != Strategy::kOracleLabel && strategy != Strategy::kMonolithBypass;
  }
  // Row name in the strategy table, e.g. "top-2", "sample-1", "threshold-0.05".
  std::string name() const;
  // Throws ArgumentError when the parameters are out of range for K experts.
  void validate(std::size_t num_experts) const;
};

// Inverse of name(): full, monolith, oracle, top-<k>, sample-<n>[-T<t>],
// threshold-<tau>, nucleus-p<p>[-T<t>]. Bare "nucleus", "threshold" and
// "sample" take default parameters.
EnsemblePolicy policy_from_name(const std::string& name);

// Sparse weights over experts (zeros for inactive ones) summing to one.
// Stochastic strategies draw from rng. MonolithBypass has no expert weights
// and is rejected here.
Vector select_experts(const Vector& probs, const EnsemblePolicy& policy, Rng& rng);

}  // namespace dfm
