// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/optim.hpp"

#include <cmath>

namespace dfm {

AdamState AdamState::for_params(Eigen::Index n, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  return s;
}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

EmaState EmaState::from_params(const Vector& params, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ArgumentError("EMA decay must lie in [0, 1)");
  return EmaState{decay, params};
}

void ema_update(EmaState& state, const Vector& params) {
  if (state.shadow.size() != params.size()) throw ShapeError("ema_update: shape mismatch");
  state.shadow = state.decay * state.shadow + (1.0 - state.decay) * params;
}

}  // namespace dfm
