// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/ensemble.hpp"

#include <sstream>

namespace dfm {

MlpVelocity::MlpVelocity(MlpModel model) : model_(std::move(model)) {
  if (model_.shape().input_dim != model_.shape().output_dim) {
    throw ShapeError("velocity model must map R^d to R^d");
  }
}

Matrix MlpVelocity::velocity(const Matrix& x, double t) const {
  const std::vector<double> ts(static_cast<std::size_t>(x.rows()), t);
  return mlp_forward(model_, x, ts);
}

MlpRouter::MlpRouter(MlpModel model) : model_(std::move(model)) {}

Matrix MlpRouter::probabilities(const Matrix& x, double t) const {
  const std::vector<double> ts(static_cast<std::size_t>(x.rows()), t);
  return softmax_rows(mlp_forward(model_, x, ts));
}

AnalyticalMarginal::AnalyticalMarginal(std::shared_ptr<const AnalyticalFlow> flow)
    : flow_(std::move(flow)) {}

Matrix AnalyticalMarginal::velocity(const Matrix& x, double t) const {
  return flow_->marginal_flow(x, t);
}

std::uint64_t AnalyticalMarginal::forward_cost() const {
  return 4 * flow_->dataset().size() * flow_->dim();
}

AnalyticalExpert::AnalyticalExpert(std::shared_ptr<const AnalyticalFlow> flow, std::size_t k)
    : flow_(std::move(flow)), k_(k) {
  if (k_ >= flow_->num_clusters()) throw ArgumentError("analytical expert index out of range");
}

Matrix AnalyticalExpert::velocity(const Matrix& x, double t) const {
  return flow_->expert_flow(k_, x, t);
}

std::uint64_t AnalyticalExpert::forward_cost() const {
  return 4 * flow_->dataset().size() * flow_->dim();
}

AnalyticalRouter::AnalyticalRouter(std::shared_ptr<const AnalyticalFlow> flow)
    : flow_(std::move(flow)) {
  if (!flow_->has_partition()) throw ArgumentError("analytical router needs a partition");
}

Matrix AnalyticalRouter::probabilities(const Matrix& x, double t) const {
  return flow_->router_posterior(x, t);
}

std::uint64_t AnalyticalRouter::forward_cost() const {
  return 4 * flow_->dataset().size() * flow_->dim();
}

Ensemble::Ensemble(std::vector<std::shared_ptr<const VelocityField>> experts,
                   std::shared_ptr<const RouterModel> router,
                   std::shared_ptr<const VelocityField> monolith)
    : experts_(std::move(experts)), router_(std::move(router)), monolith_(std::move(monolith)) {
  if (experts_.empty()) throw ConfigurationError("ensemble needs at least one expert");
  for (const auto& e : experts_) {
    if (!e) throw ConfigurationError("ensemble has a missing expert");
  }
  if (!router_) throw ConfigurationError("ensemble has no router");
  const std::size_t d = experts_.front()->dim();
  for (const auto& e : experts_) {
    if (e->dim() != d) throw ConfigurationError("experts disagree on dimension");
  }
  if (router_->num_experts() != experts_.size()) {
    std::ostringstream os;
    os << "router predicts " << router_->num_experts() << " experts but " << experts_.size()
       << " are loaded";
    throw ConfigurationError(os.str());
  }
  if (router_->dim() != d) throw ConfigurationError("router dimension differs from experts");
  if (monolith_ && monolith_->dim() != d) {
    throw ConfigurationError("monolith dimension differs from experts");
  }
  ledger_ = std::make_shared<FlopLedger>(experts_.front()->forward_cost(),
                                         router_->forward_cost());
}

Ensemble Ensemble::analytical(std::shared_ptr<const AnalyticalFlow> flow) {
  if (!flow->has_partition()) throw ArgumentError("analytical ensemble needs a partition");
  std::vector<std::shared_ptr<const VelocityField>> experts;
  for (std::size_t k = 0; k < flow->num_clusters(); ++k) {
    experts.push_back(std::make_shared<AnalyticalExpert>(flow, k));
  }
  return Ensemble(std::move(experts), std::make_shared<AnalyticalRouter>(flow),
                  std::make_shared<AnalyticalMarginal>(flow));
}

Ensemble Ensemble::from_checkpoints(const std::vector<Checkpoint>& experts,
                                    const Checkpoint& router, const Checkpoint* monolith) {
  if (experts.empty()) throw ConfigurationError("no expert checkpoints");
  if (router.role != Role::kRouter) throw ConfigurationError("router checkpoint has wrong role");
  const std::size_t k_total = router.num_experts;
  if (experts.size() != k_total) {
    std::ostringstream os;
    os << "router was trained for K = " << k_total << " but " << experts.size()
       << " expert checkpoints were given";
    throw ConfigurationError(os.str());
  }
  std::vector<bool> seen(k_total, false);
  std::vector<std::shared_ptr<const VelocityField>> fields(k_total);
  for (const Checkpoint& c : experts) {
    if (c.role != Role::kExpert) throw ConfigurationError("expert checkpoint has wrong role");
    if (c.num_experts != k_total) {
      std::ostringstream os;
      os << "expert " << c.k << " belongs to a K = " << c.num_experts << " ensemble, router to K = "
         << k_total;
      throw ConfigurationError(os.str());
    }
    if (seen[c.k]) throw ConfigurationError("duplicate checkpoint for expert " + std::to_string(c.k));
    if (c.schedule != router.schedule) throw ConfigurationError("checkpoints disagree on schedule");
    seen[c.k] = true;
    fields[c.k] = std::make_shared<MlpVelocity>(c.model());
  }
  std::shared_ptr<const VelocityField> mono;
  if (monolith) {
    if (monolith->role != Role::kMonolith && monolith->role != Role::kStudent) {
      throw ConfigurationError("monolith checkpoint has wrong role");
    }
    if (monolith->schedule != router.schedule) {
      throw ConfigurationError("monolith schedule differs from the ensemble");
    }
    mono = std::make_shared<MlpVelocity>(monolith->model());
  }
  return Ensemble(std::move(fields), std::make_shared<MlpRouter>(router.model()), std::move(mono));
}

Matrix Ensemble::flow(const Matrix& x, double t, const EnsemblePolicy& policy,
                      const Rng* policy_rng, std::span<const std::size_t> labels) const {
  const std::size_t k_total = experts_.size();
  const auto rows = static_cast<std::size_t>(x.rows());
  if (x.cols() != static_cast<Eigen::Index>(dim())) throw ShapeError("ensemble input dimension");
  policy.validate(k_total);
  if (policy.strategy == Strategy::kMonolithBypass) {
    if (!monolith_) throw ConfigurationError("monolith strategy requested but none is loaded");
    ledger_->record_monolith(rows);
    return monolith_->velocity(x, t);
  }
  if (!labels.empty() && labels.size() != rows) throw ShapeError("one oracle label per row");
  if (policy.stochastic() && !policy_rng) {
    throw ArgumentError("stochastic strategy needs a policy RNG stream");
  }

  // Per-row weights over experts.
  Matrix weights = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(k_total));
  if (policy.strategy == Strategy::kOracleLabel) {
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t label = labels.empty() ? policy.label : labels[i];
      if (label >= k_total) throw ArgumentError("oracle label out of range");
      weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(label)) = 1.0;
    }
  } else {
    const Matrix probs = router_->probabilities(x, t);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      Rng row_rng = policy_rng ? policy_rng->split(i) : Rng(0);
      weights.row(r) = select_experts(probs.row(r).transpose(), policy, row_rng).transpose();
    }
  }

  Matrix out = Matrix::Zero(x.rows(), x.cols());
  std::uint64_t active = 0;
  for (std::size_t k = 0; k < k_total; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    // Full evaluates every expert on every row; sparse policies gather.
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (policy.strategy == Strategy::kFull || weights(i, kk) != 0.0) idx.push_back(i);
    }
    if (idx.empty()) continue;
    active += idx.size();
    if (idx.size() == rows) {
      const Matrix v = experts_[k]->velocity(x, t);
      for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) += weights(i, kk) * v.row(i);
      continue;
    }
    Matrix xs(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) xs.row(static_cast<Eigen::Index>(j)) = x.row(idx[j]);
    const Matrix v = experts_[k]->velocity(xs, t);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.row(idx[j]) += weights(idx[j], kk) * v.row(static_cast<Eigen::Index>(j));
    }
  }
  ledger_->record_ensemble(rows, active, policy.uses_router());
  return out;
}

}  // namespace dfm
