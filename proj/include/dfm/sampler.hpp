// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic ODE sampler from noise at t = 1 down to t_min.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dfm/ensemble.hpp"
#include "dfm/schedule.hpp"

namespace dfm {

enum class Integrator { kEuler, kHeun };

const char* to_string(Integrator i);
Integrator integrator_from_string(const std::string& name);

struct SamplerConfig {
  std::size_t steps = 50;
  Integrator integrator = Integrator::kEuler;
  ScheduleKind schedule = ScheduleKind::kLinear;
  double t_min = kDefaultTMin;
  bool keep_trajectory = false;

  void validate() const;
  // steps + 1 uniformly spaced times from 1 down to t_min.
  std::vector<double> grid() const;
};

struct SampleResult {
  Matrix samples;                  // implied x_0 at t_min
  std::vector<double> times;       // grid, when trajectories are kept
  std::vector<Matrix> trajectory;  // state at each grid time
};

// field(x, t, step) returns one velocity row per state row.
using FieldFn = std::function<Matrix(const Matrix& x, double t, std::size_t step)>;

// Noise is drawn from rng.split("noise"); the field receives no RNG.
SampleResult sample_field(const FieldFn& field, std::size_t dim, std::size_t n,
                          const SamplerConfig& config, const Rng& rng);

SampleResult sample(const VelocityField& field, const SamplerConfig& config, std::size_t n,
                    const Rng& rng);

// Stochastic policies draw from rng.split("policy").split(step).split(row),
// independent of the noise stream. `labels` are per-sample oracle labels.
SampleResult sample(const Ensemble& ensemble, const EnsemblePolicy& policy,
                    const SamplerConfig& config, std::size_t n, const Rng& rng,
                    std::span<const std::size_t> labels = {});

// Samples and trajectory as CSV: step,t,sample_id,dim_0,...
std::string trajectory_to_csv(const SampleResult& result);

}  // namespace dfm
