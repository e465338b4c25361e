// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/flops.hpp"

namespace dfm {

const char* to_string(Role role) {
  switch (role) {
    case Role::kExpert: return "expert";
    case Role::kRouter: return "router";
    case Role::kMonolith: return "monolith";
    case Role::kStudent: return "student";
  }
  return "unknown";
}

Role role_from_string(const std::string& name) {
  if (name == "expert") return Role::kExpert;
  if (name == "router") return Role::kRouter;
  if (name == "monolith") return Role::kMonolith;
  if (name == "student" || name == "distill") return Role::kStudent;
  throw ArgumentError("unknown role '" + name + "'");
}

double LedgerTotals::router_overhead() const {
  const auto experts = train_cost[static_cast<int>(Role::kExpert)];
  if (experts == 0) return 0.0;
  return static_cast<double>(train_cost[static_cast<int>(Role::kRouter)]) /
         static_cast<double>(experts);
}

FlopLedger::FlopLedger(std::uint64_t expert_fwd_cost, std::uint64_t router_fwd_cost)
    : expert_fwd_cost_(expert_fwd_cost), router_fwd_cost_(router_fwd_cost) {}

void FlopLedger::record_ensemble(std::uint64_t rows, std::uint64_t active_experts,
                                 bool router_ran) {
  expert_forwards_.fetch_add(active_experts, std::memory_order_relaxed);
  if (router_ran) router_forwards_.fetch_add(rows, std::memory_order_relaxed);
}

void FlopLedger::record_monolith(std::uint64_t rows) {
  monolith_forwards_.fetch_add(rows, std::memory_order_relaxed);
}

void FlopLedger::record_training(Role role, std::uint64_t samples, std::uint64_t cost) {
  const auto r = static_cast<int>(role);
  train_samples_[r].fetch_add(samples, std::memory_order_relaxed);
  train_cost_[r].fetch_add(cost, std::memory_order_relaxed);
}

LedgerTotals FlopLedger::totals() const {
  LedgerTotals t;
  t.expert_forwards = expert_forwards_.load();
  t.router_forwards = router_forwards_.load();
  t.monolith_forwards = monolith_forwards_.load();
  t.inference_cost = (t.expert_forwards + t.monolith_forwards) * expert_fwd_cost_ +
                     t.router_forwards * router_fwd_cost_;
  for (int r = 0; r < 4; ++r) {
    t.train_cost[r] = train_cost_[r].load();
    t.train_samples[r] = train_samples_[r].load();
  }
  return t;
}

void FlopLedger::reset() {
  expert_forwards_ = 0;
  router_forwards_ = 0;
  monolith_forwards_ = 0;
  for (int r = 0; r < 4; ++r) {
    train_cost_[r] = 0;
    train_samples_[r] = 0;
  }
}

std::optional<std::uint64_t> ledger_cost(const FlopLedger& ledger, const EnsemblePolicy& policy,
                                         std::size_t num_experts) {
  policy.validate(num_experts);
  const std::uint64_t e = ledger.expert_fwd_cost();
  const std::uint64_t r = ledger.router_fwd_cost();
  switch (policy.strategy) {
    case Strategy::kMonolithBypass:
    case Strategy::kOracleLabel: return e;
    case Strategy::kFull: return num_experts * e + r;
    case Strategy::kTopK: return policy.k * e + r;
    case Strategy::kSample: return policy.n_active * e + r;
    case Strategy::kNucleus: return e + r;
    case Strategy::kThreshold: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<CostRow> strategy_cost_table(const FlopLedger& ledger, std::size_t num_experts) {
  std::vector<std::pair<std::string, EnsemblePolicy>> rows = {
      {"Monolith", EnsemblePolicy::monolith()}, {"Oracle", EnsemblePolicy::oracle()},
      {"Full", EnsemblePolicy::full()},
  };
  for (std::size_t k = 1; k <= 3 && k <= num_experts; ++k) {
    rows.emplace_back("Top-" + std::to_string(k), EnsemblePolicy::top_k(k));
  }
  for (std::size_t n = 1; n <= 3 && n <= num_experts; ++n) {
    rows.emplace_back("Sample-" + std::to_string(n), EnsemblePolicy::sample(n));
  }
  rows.emplace_back("Threshold-0.01", EnsemblePolicy::threshold(0.01));
  rows.emplace_back("Threshold-0.05", EnsemblePolicy::threshold(0.05));
  rows.emplace_back("Threshold-0.1", EnsemblePolicy::threshold(0.1));
  rows.emplace_back("Nucleus (T=0.5)", EnsemblePolicy::nucleus(0.9, 0.5));
  rows.emplace_back("Nucleus (T=1.0)", EnsemblePolicy::nucleus(0.9, 1.0));
  rows.emplace_back("Nucleus (T=2.0)", EnsemblePolicy::nucleus(0.9, 2.0));
  std::vector<CostRow> out;
  for (const auto& [name, policy] : rows) {
    out.push_back({name, ledger_cost(ledger, policy, num_experts)});
  }
  return out;
}

}  // namespace dfm
