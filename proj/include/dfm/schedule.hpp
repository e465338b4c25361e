// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "dfm/numerics.hpp"

namespace dfm {

enum class ScheduleKind {
  kLinear,  // alpha = 1 - t, sigma = t
  kCosine,  // alpha = cos(pi t / 2), sigma = sin(pi t / 2)
};

const char* to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

inline constexpr double kDefaultTMin = 1e-3;

// Corruption path x_t = alpha(t) x_0 + sigma(t) eps with data at t = 0 and
// noise at t = 1.
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(ScheduleKind kind, double t_min = kDefaultTMin);

  ScheduleKind kind() const { return kind_; }
  double t_min() const { return t_min_; }

  double alpha(double t) const;
  double sigma(double t) const;
  double alpha_dot(double t) const;
  double sigma_dot(double t) const;

  // Throws DomainError unless t in [t_min, 1].
  void check_time(double t) const;

  // Data-point estimate implied by a velocity: solves x = a x0 + s eps,
  // u = a' x0 + s' eps for x0. Equals x - t u on the linear schedule.
  Vector implied_x0(std::span<const double> x, std::span<const double> u, double t) const;

  bool operator==(const Schedule&) const = default;

 private:
  ScheduleKind kind_ = ScheduleKind::kLinear;
  double t_min_ = kDefaultTMin;
};

// u_t(x_t | x_0) = alpha'(t) x_0 + sigma'(t) (x_t - alpha(t) x_0) / sigma(t).
Vector conditional_flow(const Schedule& schedule, std::span<const double> x_t,
                        std::span<const double> x_0, double t);

}  // namespace dfm
