// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compute accounting for training and inference. Costs are integers in
// whatever unit the caller configures (FLOPs for MLPs, GFLOPs for the
// reference table).

#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfm/policy.hpp"

namespace dfm {

enum class Role { kExpert, kRouter, kMonolith, kStudent };

const char* to_string(Role role);
Role role_from_string(const std::string& name);

struct LedgerTotals {
  std::uint64_t expert_forwards = 0;  // per-sample expert evaluations at inference
  std::uint64_t router_forwards = 0;
  std::uint64_t monolith_forwards = 0;
  std::uint64_t inference_cost = 0;
  std::uint64_t train_cost[4] = {0, 0, 0, 0};  // indexed by Role
  std::uint64_t train_samples[4] = {0, 0, 0, 0};

  // Router training cost over total expert training cost.
  double router_overhead() const;
};

// Safe under concurrent increments from sampler and worker threads.
class FlopLedger {
 public:
  FlopLedger(std::uint64_t expert_fwd_cost, std::uint64_t router_fwd_cost);

  std::uint64_t expert_fwd_cost() const { return expert_fwd_cost_; }
  std::uint64_t router_fwd_cost() const { return router_fwd_cost_; }

  // One ensemble evaluation of `rows` samples with `active_experts` expert
  // evaluations in total.
  void record_ensemble(std::uint64_t rows, std::uint64_t active_experts, bool router_ran);
  void record_monolith(std::uint64_t rows);
  void record_training(Role role, std::uint64_t samples, std::uint64_t cost);

  LedgerTotals totals() const;
  void reset();

 private:
  std::uint64_t expert_fwd_cost_;
  std::uint64_t router_fwd_cost_;
  std::atomic<std::uint64_t> expert_forwards_{0};
  std::atomic<std::uint64_t> router_forwards_{0};
  std::atomic<std::uint64_t> monolith_forwards_{0};
  std::atomic<std::uint64_t> train_cost_[4] = {};
  std::atomic<std::uint64_t> train_samples_[4] = {};
};

// Cost of one sampling step for one sample. Threshold has no fixed cost and
// returns nullopt; its cost is reported from realized active counts.
std::optional<std::uint64_t> ledger_cost(const FlopLedger& ledger, const EnsemblePolicy& policy,
                                         std::size_t num_experts);

struct CostRow {
  std::string name;
  std::optional<std::uint64_t> cost;
};

// Reference strategy table in row order: Monolith, Oracle, Full, Top-1..3,
// Sample-1..3, Threshold-{0.01,0.05,0.1}, Nucleus T={0.5,1,2}.
std::vector<CostRow> strategy_cost_table(const FlopLedger& ledger, std::size_t num_experts);

}  // namespace dfm
