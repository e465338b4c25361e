// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/sampler.hpp"

#include <sstream>

#include "dfm/io.hpp"

namespace dfm {

const char* to_string(Integrator i) { return i == Integrator::kEuler ? "euler" : "heun"; }

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler") return Integrator::kEuler;
  if (name == "heun") return Integrator::kHeun;
  throw ArgumentError("unknown integrator '" + name + "'");
}

void SamplerConfig::validate() const {
  if (steps == 0) throw ArgumentError("sampler: steps must be at least 1");
  if (!(t_min > 0.0 && t_min < 1.0)) throw ArgumentError("sampler: t_min must lie in (0, 1)");
}

std::vector<double> SamplerConfig::grid() const {
  validate();
  std::vector<double> g(steps + 1);
  const double span = 1.0 - t_min;
  for (std::size_t i = 0; i <= steps; ++i) {
    g[i] = 1.0 - span * static_cast<double>(i) / static_cast<double>(steps);
  }
  g.back() = t_min;
  return g;
}

namespace {

void check_finite(const Matrix& x, std::size_t step, double t) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "sampler diverged: non-finite state at step " << step << " (t = " << t << ")";
    throw SamplingError(os.str());
  }
}

}  // namespace

SampleResult sample_field(const FieldFn& field, std::size_t dim, std::size_t n,
                          const SamplerConfig& config, const Rng& rng) {
  const std::vector<double> grid = config.grid();
  const Schedule schedule(config.schedule, config.t_min);
  Rng noise = rng.split("noise");
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  fill_normal(noise, x);

  SampleResult out;
  if (config.keep_trajectory) {
    out.times = grid;
    out.trajectory.push_back(x);
  }
  for (std::size_t s = 0; s < config.steps; ++s) {
    const double t = grid[s];
    const double h = grid[s + 1] - t;  // negative
    const Matrix u = field(x, t, s);
    if (config.integrator == Integrator::kEuler) {
      x += h * u;
    } else {
      const Matrix pred = x + h * u;
      check_finite(pred, s, grid[s + 1]);
      const Matrix u2 = field(pred, grid[s + 1], s);
      x += 0.5 * h * (u + u2);
    }
    check_finite(x, s, grid[s + 1]);
    if (config.keep_trajectory) out.trajectory.push_back(x);
  }
  const Matrix u_last = field(x, config.t_min, config.steps);
  out.samples.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.samples.row(i) = schedule.implied_x0(row_span(x, i), row_span(u_last, i), config.t_min);
  }
  check_finite(out.samples, config.steps, config.t_min);
  return out;
}

SampleResult sample(const VelocityField& field, const SamplerConfig& config, std::size_t n,
                    const Rng& rng) {
  return sample_field([&](const Matrix& x, double t, std::size_t) { return field.velocity(x, t); },
                      field.dim(), n, config, rng);
}

SampleResult sample(const Ensemble& ensemble, const EnsemblePolicy& policy,
                    const SamplerConfig& config, std::size_t n, const Rng& rng,
                    std::span<const std::size_t> labels) {
  policy.validate(ensemble.num_experts());
  if (!labels.empty() && labels.size() != n) throw ShapeError("one oracle label per sample");
  const Rng policy_stream = rng.split("policy");
  return sample_field(
      [&](const Matrix& x, double t, std::size_t step) {
        const Rng step_rng = policy_stream.split(step);
        return ensemble.flow(x, t, policy, &step_rng, labels);
      },
      ensemble.dim(), n, config, rng);
}

std::string trajectory_to_csv(const SampleResult& result) {
  std::string out = "step,t,sample_id";
  const Eigen::Index d = result.samples.cols();
  for (Eigen::Index j = 0; j < d; ++j) out += ",dim_" + std::to_string(j);
  out += '\n';
  for (std::size_t s = 0; s < result.trajectory.size(); ++s) {
    const Matrix& x = result.trajectory[s];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out += std::to_string(s) + "," + format_double(result.times[s]) + "," + std::to_string(i);
      for (Eigen::Index j = 0; j < d; ++j) out += "," + format_double(x(i, j));
      out += '\n';
    }
  }
  return out;
}

}  // namespace dfm
