// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON checkpoints. Parameters round-trip bit-exactly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dfm/flops.hpp"
#include "dfm/mlp.hpp"
#include "dfm/schedule.hpp"

namespace dfm {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  Role role = Role::kExpert;
  std::size_t k = 0;            // expert index; 0 for other roles
  std::size_t num_experts = 1;  // K of the ensemble this belongs to
  ScheduleKind schedule = ScheduleKind::kLinear;
  double t_min = kDefaultTMin;
  MlpShape shape;
  Vector params_raw;
  Vector params_ema;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  // EMA parameters by default; evaluation always uses them.
  MlpModel model(bool ema = true) const;
  bool operator==(const Checkpoint& other) const;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text, const std::string& source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// IoError when unreadable; ConfigurationError when malformed or of another version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Canonical file name: expert_<k>.json, router.json, monolith.json, student.json.
std::string checkpoint_filename(Role role, std::size_t k = 0);

}  // namespace dfm
