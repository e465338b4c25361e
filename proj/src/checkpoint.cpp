// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/checkpoint.hpp"

#include <cstdio>

#include <json.hpp>

#include "dfm/io.hpp"

namespace dfm {

using nlohmann::json;

MlpModel Checkpoint::model(bool ema) const {
  MlpModel m(shape);
  m.set_params(ema ? params_ema : params_raw);
  return m;
}

bool Checkpoint::operator==(const Checkpoint& o) const {
  return version == o.version && role == o.role && k == o.k && num_experts == o.num_experts &&
         schedule == o.schedule && t_min == o.t_min && shape == o.shape &&
         params_raw.size() == o.params_raw.size() && params_raw == o.params_raw &&
         params_ema.size() == o.params_ema.size() && params_ema == o.params_ema &&
         step == o.step && seed == o.seed && config_hash == o.config_hash;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw ConfigurationError("config_hash must be 16 hex digits");
  return std::stoull(s, nullptr, 16);
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.begin(), v.end())); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["version"] = c.version;
  j["role"] = to_string(c.role);
  j["k"] = c.k;
  j["num_experts"] = c.num_experts;
  j["schedule"] = {{"kind", to_string(c.schedule)}, {"t_min", c.t_min}};
  j["dims"] = {{"input", c.shape.input_dim},
               {"output", c.shape.output_dim},
               {"hidden", c.shape.hidden},
               {"activation", to_string(c.shape.activation)},
               {"time_features", c.shape.time_features}};
  j["params_raw"] = vector_json(c.params_raw);
  j["params_ema"] = vector_json(c.params_ema);
  j["step"] = c.step;
  j["seed"] = c.seed;
  j["config_hash"] = hex64(c.config_hash);
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& source) {
  try {
    const json j = json::parse(text);
    Checkpoint c;
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion) {
      throw ConfigurationError(source + ": unsupported checkpoint version " +
                               std::to_string(c.version));
    }
    c.role = role_from_string(j.at("role").get<std::string>());
    c.k = j.at("k").get<std::size_t>();
    c.num_experts = j.at("num_experts").get<std::size_t>();
    c.schedule = schedule_kind_from_string(j.at("schedule").at("kind").get<std::string>());
    c.t_min = j.at("schedule").at("t_min").get<double>();
    const json& dims = j.at("dims");
    c.shape.input_dim = dims.at("input").get<std::size_t>();
    c.shape.output_dim = dims.at("output").get<std::size_t>();
    c.shape.hidden = dims.at("hidden").get<std::vector<std::size_t>>();
    c.shape.activation = activation_from_string(dims.at("activation").get<std::string>());
    c.shape.time_features = dims.at("time_features").get<std::size_t>();
    c.shape.validate();
    c.params_raw = vector_from(j.at("params_raw"));
    c.params_ema = vector_from(j.at("params_ema"));
    if (c.params_raw.size() != static_cast<Eigen::Index>(c.shape.param_count()) ||
        c.params_ema.size() != c.params_raw.size()) {
      throw ConfigurationError(source + ": parameter count does not match dims");
    }
    c.step = j.at("step").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
    if (c.k >= c.num_experts) throw ConfigurationError(source + ": k must be below num_experts");
    return c;
  } catch (const json::exception& e) {
    throw ConfigurationError(source + ": malformed checkpoint: " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigurationError(source + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path), path.string());
}

std::string checkpoint_filename(Role role, std::size_t k) {
  if (role == Role::kExpert) return "expert_" + std::to_string(k) + ".json";
  return std::string(to_string(role)) + ".json";
}

}  // namespace dfm
