// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dfm {

const char* to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ArgumentError("unknown schedule '" + name + "' (expected linear or cosine)");
}

Schedule::Schedule(ScheduleKind kind, double t_min) : kind_(kind), t_min_(t_min) {
  if (!(t_min > 0.0 && t_min < 1.0)) throw ArgumentError("t_min must lie in (0, 1)");
}

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
}

double Schedule::alpha(double t) const {
  return kind_ == ScheduleKind::kLinear ? 1.0 - t : std::cos(kHalfPi * t);
}

double Schedule::sigma(double t) const {
  return kind_ == ScheduleKind::kLinear ? t : std::sin(kHalfPi * t);
}

double Schedule::alpha_dot(double t) const {
  return kind_ == ScheduleKind::kLinear ? -1.0 : -kHalfPi * std::sin(kHalfPi * t);
}

double Schedule::sigma_dot(double t) const {
  return kind_ == ScheduleKind::kLinear ? 1.0 : kHalfPi * std::cos(kHalfPi * t);
}

void Schedule::check_time(double t) const {
  if (!(t >= t_min_ && t <= 1.0)) {
    std::ostringstream os;
    os << "time " << t << " outside [" << t_min_ << ", 1]";
    throw DomainError(os.str());
  }
}

Vector Schedule::implied_x0(std::span<const double> x, std::span<const double> u,
                            double t) const {
  if (x.size() != u.size()) throw ShapeError("implied_x0: dimension mismatch");
  const double a = alpha(t), s = sigma(t), ad = alpha_dot(t), sd = sigma_dot(t);
  const double det = sd * a - s * ad;
  Vector x0(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x0[static_cast<Eigen::Index>(i)] = (sd * x[i] - s * u[i]) / det;
  }
  return x0;
}

Vector conditional_flow(const Schedule& schedule, std::span<const double> x_t,
                        std::span<const double> x_0, double t) {
  schedule.check_time(t);
  if (x_t.size() != x_0.size()) throw ShapeError("conditional_flow: dimension mismatch");
  const double a = schedule.alpha(t), s = schedule.sigma(t);
  const double ad = schedule.alpha_dot(t), sd = schedule.sigma_dot(t);
  Vector u(static_cast<Eigen::Index>(x_t.size()));
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const double eps = (x_t[i] - a * x_0[i]) / s;
    u[static_cast<Eigen::Index>(i)] = ad * x_0[i] + sd * eps;
  }
  return u;
}

}  // namespace dfm
