// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Expert, router and student training, plus the isolated-worker orchestrator.
// Every worker owns its data shard and RNG stream; no state is shared.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfm/checkpoint.hpp"
#include "dfm/dataset.hpp"
#include "dfm/flops.hpp"
#include "dfm/mlp.hpp"
#include "dfm/partition.hpp"
#include "dfm/schedule.hpp"

namespace dfm {

struct ModelConfig {
  std::vector<std::size_t> expert_hidden = {64, 64};
  // Empty means half the expert widths.
  std::vector<std::size_t> router_hidden;
  Activation activation = Activation::kTanh;
  std::size_t time_features = 16;

  MlpShape expert_shape(std::size_t dim) const;
  MlpShape router_shape(std::size_t dim, std::size_t num_experts) const;
  std::string describe() const;
};

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 256;  // global; experts get batch_size / K
  double lr = 1e-4;
  double ema_decay = 0.9999;
  std::uint64_t seed = 0;
  ScheduleKind schedule = ScheduleKind::kLinear;
  double t_min = kDefaultTMin;
  std::size_t loss_report_every = 100;

  Schedule make_schedule() const { return Schedule(schedule, t_min); }
  void validate() const;
  std::string describe() const;
};

struct MetricRow {
  std::uint64_t step = 0;
  double loss = 0.0;  // exponentially smoothed training loss
  std::uint64_t flops = 0;
};

std::string metrics_to_csv(const std::vector<MetricRow>& rows);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricRow> metrics;
  std::uint64_t samples = 0;  // training samples forwarded
  std::uint64_t flops = 0;    // 3 x forward cost per sample (forward + backward)
};

// Called before every optimizer step; throwing aborts the run.
using StepHook = std::function<void(std::size_t step)>;

// Conditional flow matching: t ~ U[t_min, 1], eps ~ N(0, I),
// loss = mean ||v(x_t, t) - u(x_t | x_0)||^2.
LossGrad cfm_loss(const MlpModel& model, const Matrix& x0, Rng& rng, const Schedule& schedule);
// Cross-entropy of softmax(r(x_t, t)) against the cluster label of x_0.
LossGrad router_loss(const MlpModel& model, const Matrix& x0,
                     std::span<const std::size_t> labels, Rng& rng, const Schedule& schedule);
// mean ||v_student(x_t, t) - v_teacher[label](x_t, t)||^2.
LossGrad distill_loss(const MlpModel& student, std::span<const MlpModel> teachers,
                      const Matrix& x0, std::span<const std::size_t> labels, Rng& rng,
                      const Schedule& schedule);

struct ExpertJob {
  std::size_t k = 0;
  std::size_t num_experts = 1;
  Role role = Role::kExpert;
};

// Trains on `shard` only. The RNG stream depends on (seed, k) alone, so a
// monolith equals expert 0 of a one-expert run with the same seed.
TrainResult train_expert(const Dataset& shard, const ExpertJob& job, const TrainConfig& config,
                         const MlpShape& shape, const StepHook& hook = {});
TrainResult train_monolith(const Dataset& data, const TrainConfig& config, const MlpShape& shape,
                           const StepHook& hook = {});
// `data` must carry cluster labels in [0, num_experts).
TrainResult train_router(const Dataset& data, std::size_t num_experts, const TrainConfig& config,
                         const MlpShape& shape, const StepHook& hook = {});
// Teachers indexed by cluster label; `init` optionally seeds the student.
TrainResult train_distilled(const Dataset& data, std::span<const MlpModel> teachers,
                            const TrainConfig& config, const MlpShape& shape,
                            const std::optional<Vector>& init = {}, const StepHook& hook = {});

enum class RunMode { kSerial, kThreads };

const char* to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

// Fault injection: called by every worker before each step.
using FaultHook = std::function<void(Role role, std::size_t k, std::size_t step)>;

struct OrchestratorConfig {
  TrainConfig expert;
  TrainConfig router;
  ModelConfig model;
  RunMode mode = RunMode::kSerial;
  // When set, each worker writes its checkpoint and metrics here on success.
  std::optional<std::filesystem::path> output_dir;
  FaultHook fault_hook;
};

struct WorkerOutcome {
  Role role = Role::kExpert;
  std::size_t k = 0;
  bool ok = false;
  std::string error;
  std::optional<TrainResult> result;
};

struct OrchestrationResult {
  std::vector<WorkerOutcome> experts;
  WorkerOutcome router;

  bool all_ok() const;
  std::vector<std::size_t> failed_experts() const;
};

// Spawns K expert workers and one router worker. Per-expert batch is the
// global batch divided by K. A failing worker is reported in its outcome and
// leaves the others untouched.
OrchestrationResult orchestrate_decentralized(const Dataset& data, const Partition& partition,
                                              const OrchestratorConfig& config,
                                              FlopLedger* ledger = nullptr);

}  // namespace dfm
