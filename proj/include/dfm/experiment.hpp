// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment drivers comparing decentralized ensembles with monoliths on
// synthetic data. Each arm is trained (or loaded from a cache directory),
// sampled with shared noise, and scored against a held-out split.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dfm/partition.hpp"
#include "dfm/policy.hpp"
#include "dfm/sampler.hpp"
#include "dfm/synthetic.hpp"
#include "dfm/training.hpp"

namespace dfm {

struct EvalReport {
  std::string experiment;
  std::string arm;
  std::string metric;  // "sliced_wasserstein" or "energy_distance" (FID stand-ins), ...
  double value = 0.0;
  std::size_t n_generated = 0;
  std::size_t n_reference = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t sampling_flops = 0;  // from the ensemble ledger
  std::uint64_t training_flops = 0;
};

struct ExperimentConfig {
  std::string name;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  SyntheticSpec data;                 // seed replaced by each run seed
  double holdout_fraction = 0.2;
  PartitionSpec partition;            // num_clusters = K for single-K experiments
  ModelConfig model;
  TrainConfig train;                  // experts and monolith share global batch and steps
  TrainConfig router_train;
  TrainConfig distill_train;
  SamplerConfig sampler;
  std::size_t n_samples = 4096;
  std::size_t n_projections = 128;
  // Policies used to sample DDM arms; the first one names the primary arm.
  std::vector<EnsemblePolicy> ddm_policies = {EnsemblePolicy::top_k(1)};
  std::vector<EnsemblePolicy> strategies;  // strategy_table rows; empty means the reference rows
  std::vector<std::size_t> expert_counts = {4, 8, 16};
  std::vector<double> probe_times = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t probes_per_time = 200;
  bool analytical = false;
  RunMode mode = RunMode::kSerial;
  // Checkpoints are stored here and reused when present.
  std::optional<std::filesystem::path> cache_dir;
  // Never train: every arm must already be in cache_dir.
  bool require_checkpoints = false;

  void validate() const;
  std::string describe() const;
  std::uint64_t hash() const;
};

struct ExperimentResult {
  std::vector<EvalReport> reports;
  std::string table_csv;
  // Generated points per arm and the held-out set, for the first seed only.
  std::vector<std::pair<std::string, Matrix>> samples;
  Matrix reference;

  // Mean over seeds of one arm's metric; throws ArgumentError if absent.
  double mean(const std::string& arm, const std::string& metric) const;
  bool has(const std::string& arm, const std::string& metric) const;
};

const std::vector<std::string>& experiment_names();

// Default desk-scale configuration for a named experiment.
ExperimentConfig default_experiment(const std::string& name);

// ConfigurationError for an unknown name or, with require_checkpoints, a
// missing arm (the message names it).
ExperimentResult run_experiment(const ExperimentConfig& config);

// Reference strategy rows: monolith, oracle, full, top-1..3, sample-1..3,
// threshold-{0.01,0.05,0.1}, nucleus T={0.5,1,2}.
std::vector<EnsemblePolicy> reference_strategies(std::size_t num_experts);

std::string reports_to_json(const std::vector<EvalReport>& reports);
std::string reports_to_csv(const std::vector<EvalReport>& reports);

// Scatter overlay of generated (blue) and reference (grey) points.
std::string scatter_svg(const Matrix& generated, const Matrix& reference);

}  // namespace dfm
