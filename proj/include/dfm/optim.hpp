// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "dfm/numerics.hpp"

namespace dfm {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  Vector m;
  Vector v;

  static AdamState for_params(Eigen::Index n, double lr);
};

// Bias-corrected Adam update in place.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

struct EmaState {
  double decay = 0.9999;
  Vector shadow;

  static EmaState from_params(const Vector& params, double decay);
};

// shadow <- decay * shadow + (1 - decay) * params
void ema_update(EmaState& state, const Vector& params);

}  // namespace dfm
