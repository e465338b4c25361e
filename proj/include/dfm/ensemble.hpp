// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Velocity fields and routers, learned or analytical, and their
// router-weighted combination:  u(x, t) = sum_k w_k(x, t) v_k(x, t).

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dfm/analytical_flow.hpp"
#include "dfm/checkpoint.hpp"
#include "dfm/flops.hpp"
#include "dfm/mlp.hpp"
#include "dfm/policy.hpp"

namespace dfm {

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual std::size_t dim() const = 0;
  // One row per sample, all at time t.
  virtual Matrix velocity(const Matrix& x, double t) const = 0;
  // Cost of one per-sample forward pass.
  virtual std::uint64_t forward_cost() const = 0;
};

class RouterModel {
 public:
  virtual ~RouterModel() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_experts() const = 0;
  // Rows on the simplex.
  virtual Matrix probabilities(const Matrix& x, double t) const = 0;
  virtual std::uint64_t forward_cost() const = 0;
};

class MlpVelocity : public VelocityField {
 public:
  explicit MlpVelocity(MlpModel model);
  std::size_t dim() const override { return model_.shape().output_dim; }
  Matrix velocity(const Matrix& x, double t) const override;
  std::uint64_t forward_cost() const override { return model_.shape().forward_flops(); }
  const MlpModel& model() const { return model_; }

 private:
  MlpModel model_;
};

class MlpRouter : public RouterModel {
 public:
  explicit MlpRouter(MlpModel model);
  std::size_t dim() const override { return model_.shape().input_dim; }
  std::size_t num_experts() const override { return model_.shape().output_dim; }
  Matrix probabilities(const Matrix& x, double t) const override;
  std::uint64_t forward_cost() const override { return model_.shape().forward_flops(); }
  const MlpModel& model() const { return model_; }

 private:
  MlpModel model_;
};

// Exact fields from a discrete dataset. Costs count 4 flops per point-coordinate.
class AnalyticalMarginal : public VelocityField {
 public:
  explicit AnalyticalMarginal(std::shared_ptr<const AnalyticalFlow> flow);
  std::size_t dim() const override { return flow_->dim(); }
  Matrix velocity(const Matrix& x, double t) const override;
  std::uint64_t forward_cost() const override;

 private:
  std::shared_ptr<const AnalyticalFlow> flow_;
};

class AnalyticalExpert : public VelocityField {
 public:
  AnalyticalExpert(std::shared_ptr<const AnalyticalFlow> flow, std::size_t k);
  std::size_t dim() const override { return flow_->dim(); }
  Matrix velocity(const Matrix& x, double t) const override;
  std::uint64_t forward_cost() const override;

 private:
  std::shared_ptr<const AnalyticalFlow> flow_;
  std::size_t k_;
};

class AnalyticalRouter : public RouterModel {
 public:
  explicit AnalyticalRouter(std::shared_ptr<const AnalyticalFlow> flow);
  std::size_t dim() const override { return flow_->dim(); }
  std::size_t num_experts() const override { return flow_->num_clusters(); }
  Matrix probabilities(const Matrix& x, double t) const override;
  std::uint64_t forward_cost() const override;

 private:
  std::shared_ptr<const AnalyticalFlow> flow_;
};

class Ensemble {
 public:
  // Throws ConfigurationError when the router's K or any dimension disagrees.
  Ensemble(std::vector<std::shared_ptr<const VelocityField>> experts,
           std::shared_ptr<const RouterModel> router,
           std::shared_ptr<const VelocityField> monolith = nullptr);

  // Analytical experts, router and monolith over a partitioned dataset.
  static Ensemble analytical(std::shared_ptr<const AnalyticalFlow> flow);
  // Learned components from checkpoints; checks roles, K, indices and schedule.
  static Ensemble from_checkpoints(const std::vector<Checkpoint>& experts,
                                   const Checkpoint& router,
                                   const Checkpoint* monolith = nullptr);

  std::size_t num_experts() const { return experts_.size(); }
  std::size_t dim() const { return experts_.front()->dim(); }
  bool has_monolith() const { return monolith_ != nullptr; }
  const VelocityField& expert(std::size_t k) const { return *experts_.at(k); }
  const RouterModel& router() const { return *router_; }

  FlopLedger& ledger() const { return *ledger_; }

  // Router once per row, then only the active experts. Row i of a stochastic
  // policy draws from policy_rng->split(i). `labels` gives per-row oracle
  // labels; when empty, policy.label is used for every row.
  Matrix flow(const Matrix& x, double t, const EnsemblePolicy& policy,
              const Rng* policy_rng = nullptr,
              std::span<const std::size_t> labels = {}) const;

 private:
  std::vector<std::shared_ptr<const VelocityField>> experts_;
  std::shared_ptr<const RouterModel> router_;
  std::shared_ptr<const VelocityField> monolith_;
  std::shared_ptr<FlopLedger> ledger_;
};

inline Matrix ensemble_flow(const Ensemble& ensemble, const EnsemblePolicy& policy,
                            const Matrix& x, double t, const Rng* policy_rng = nullptr,
                            std::span<const std::size_t> labels = {}) {
  return ensemble.flow(x, t, policy, policy_rng, labels);
}

}  // namespace dfm
