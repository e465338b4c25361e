// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// dfm: data generation, clustering, training, sampling, evaluation and FLOP
// queries. Every run writes runs/<name>/manifest/<command>.json; passing that
// file back with --config reproduces the run.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dfm/analytical_flow.hpp"
#include "dfm/checkpoint.hpp"
#include "dfm/ensemble.hpp"
#include "dfm/errors.hpp"
#include "dfm/experiment.hpp"
#include "dfm/flops.hpp"
#include "dfm/io.hpp"
#include "dfm/metrics.hpp"
#include "dfm/partition.hpp"
#include "dfm/policy.hpp"
#include "dfm/sampler.hpp"
#include "dfm/synthetic.hpp"
#include "dfm/training.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dfm;

constexpr const char* kVersion = "0.1.0";

enum Exit : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitUsage = 2,
  kExitConfiguration = 3,
  kExitNumerical = 4,
  kExitWorker = 5,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain:
    case ErrorKind::kShape:
    case ErrorKind::kArgument:
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kConfiguration:
    case ErrorKind::kIo: return kExitConfiguration;
    case ErrorKind::kNumericalDegeneracy:
    case ErrorKind::kSampling: return kExitNumerical;
    case ErrorKind::kWorkerFailure: return kExitWorker;
  }
  return kExitOther;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) {
    if (!std::all_of(item.begin(), item.end(), ::isdigit)) {
      throw UsageError(what + ": expected a comma-separated list of integers, got '" + text + "'");
    }
    out.push_back(std::stoul(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Options

struct Global {
  std::string name = "default";
  std::string runs_root = "runs";
  std::string config;
};

struct GenDataOpts {
  std::string shape;
  std::size_t n = 0;
  std::size_t dim = 2;
  std::size_t blobs = 8;
  double separation = 10.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct ClusterOpts {
  std::string data;
  std::size_t k = 0;
  std::size_t m = 64;
  std::string mode = "feature-kmeans";
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-8;
};

struct ModelOpts {
  std::string hidden = "64,64";
  std::string router_hidden;
  std::string activation = "tanh";
  std::size_t time_features = 16;

  ModelConfig config() const {
    ModelConfig m;
    m.expert_hidden = parse_sizes(hidden, "--hidden");
    if (!router_hidden.empty()) m.router_hidden = parse_sizes(router_hidden, "--router-hidden");
    m.activation = activation_from_string(activation);
    m.time_features = time_features;
    return m;
  }
};

struct TrainOpts {
  std::string role;
  std::string data;
  std::string partition;
  std::size_t k = 0;
  CLI::Option* k_opt = nullptr;
  std::size_t experts = 0;
  CLI::Option* experts_opt = nullptr;
  std::uint64_t seed = 0;
  std::string schedule;
  double t_min = kDefaultTMin;
  std::size_t steps = 4000;
  std::size_t batch = 256;
  double lr = 1e-4;
  double ema = 0.999;
  std::size_t report_every = 100;
  std::size_t router_steps = 0;
  CLI::Option* router_steps_opt = nullptr;
  double router_lr = 0.0;
  CLI::Option* router_lr_opt = nullptr;
  ModelOpts model;
  bool decentralized = false;
  std::string mode = "serial";
  std::string teachers;
  std::string inject_fault;
};

struct SampleOpts {
  std::string strategy;
  double tau = 0.0;
  CLI::Option* tau_opt = nullptr;
  double p = 0.9;
  double temperature = 1.0;
  CLI::Option* temperature_opt = nullptr;
  std::size_t label = 0;
  CLI::Option* label_opt = nullptr;
  std::string labels;
  std::string checkpoints;
  bool analytical = false;
  std::string data;
  std::string partition;
  std::string schedule;
  double t_min = kDefaultTMin;
  std::size_t n = 0;
  std::size_t steps = 50;
  std::string integrator = "euler";
  std::uint64_t seed = 0;
  bool trajectory = false;
  std::string svg_reference;
};

struct EvalOpts {
  std::string experiment;
  std::string samples;
  std::string reference;
  std::string seeds;
  std::uint64_t seed = 0;
  std::string shape;
  std::size_t n_data = 0;
  CLI::Option* n_data_opt = nullptr;
  std::size_t blobs = 0;
  CLI::Option* blobs_opt = nullptr;
  double separation = 0.0;
  CLI::Option* separation_opt = nullptr;
  double noise = 0.0;
  CLI::Option* noise_opt = nullptr;
  std::size_t k = 0;
  CLI::Option* k_opt = nullptr;
  std::size_t m = 0;
  CLI::Option* m_opt = nullptr;
  std::size_t steps = 0;
  CLI::Option* steps_opt = nullptr;
  std::size_t batch = 0;
  CLI::Option* batch_opt = nullptr;
  double lr = 0.0;
  CLI::Option* lr_opt = nullptr;
  double ema = 0.0;
  CLI::Option* ema_opt = nullptr;
  std::size_t router_steps = 0;
  CLI::Option* router_steps_opt = nullptr;
  double router_lr = 0.0;
  CLI::Option* router_lr_opt = nullptr;
  std::size_t distill_steps = 0;
  CLI::Option* distill_steps_opt = nullptr;
  std::string hidden;
  std::string schedule;
  std::size_t n_samples = 0;
  CLI::Option* n_samples_opt = nullptr;
  std::size_t projections = 128;
  CLI::Option* projections_opt = nullptr;
  std::size_t sampler_steps = 0;
  CLI::Option* sampler_steps_opt = nullptr;
  std::string integrator;
  std::string counts;
  std::string policies;
  std::string strategies;
  bool analytical = false;
  std::string mode;
  std::string cache;
  bool require_checkpoints = false;
  bool svg = false;
};

struct FlopsOpts {
  std::uint64_t expert = 0;
  std::uint64_t router = 0;
  std::size_t k = 0;
  bool table1 = false;
  std::string strategy;
};

struct Options {
  Global global;
  GenDataOpts gen;
  ClusterOpts cluster;
  TrainOpts train;
  SampleOpts sample;
  EvalOpts eval;
  FlopsOpts flops;
};

// Options whose absence means "keep the experiment or role default".
CLI::Option* unset(CLI::Option* opt) { return opt->default_str(""); }

void add_model_options(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--hidden", m.hidden, "Expert hidden widths, comma separated");
  sub->add_option("--router-hidden", m.router_hidden,
                  "Router hidden widths (default: half the expert widths)");
  sub->add_option("--activation", m.activation, "tanh or silu");
  sub->add_option("--time-features", m.time_features, "Sinusoidal time features (even)");
}

void build(CLI::App& app, Options& o) {
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);
  app.add_option("--name", o.global.name, "Run name; outputs go to <runs-root>/<name>");
  app.add_option("--runs-root", o.global.runs_root, "Directory holding all runs");
  app.add_option("--config", o.global.config,
                 "Overlay file: key=value lines or a JSON object (a manifest works too); "
                 "flags given on the command line win");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset CSV");
  gen->add_option("--shape", o.gen.shape, "blobs, moons, spiral or checkerboard")->required();
  gen->add_option("--n", o.gen.n, "Number of points")->required();
  gen->add_option("--dim", o.gen.dim, "Dimension");
  gen->add_option("--blobs", o.gen.blobs, "Number of blobs");
  gen->add_option("--separation", o.gen.separation, "Distance between neighbouring blobs");
  gen->add_option("--noise", o.gen.noise, "Blob standard deviation / jitter");
  gen->add_option("--seed", o.gen.seed, "Random seed")->required();
  gen->add_option("--out", o.gen.out, "Output CSV (default: <run>/data/dataset.csv)");

  auto* cl = app.add_subcommand("cluster", "Partition a dataset into K clusters");
  cl->add_option("--data", o.cluster.data, "Dataset CSV")->required();
  cl->add_option("--k", o.cluster.k, "Number of clusters K")->required();
  cl->add_option("--m", o.cluster.m, "Fine centroids M");
  cl->add_option("--mode", o.cluster.mode, "feature-kmeans or random");
  cl->add_option("--seed", o.cluster.seed, "Random seed")->required();
  cl->add_option("--max-iters", o.cluster.max_iters, "Lloyd iterations per stage");
  cl->add_option("--tol", o.cluster.tol, "Relative cost tolerance");

  auto* tr = app.add_subcommand("train", "Train experts, router, monolith or a distilled student");
  tr->add_option("--role", o.train.role, "expert, router, monolith or distill");
  tr->add_option("--data", o.train.data, "Dataset CSV")->required();
  tr->add_option("--partition", o.train.partition, "Assignment CSV (index,cluster)");
  o.train.k_opt = unset(tr->add_option("--k", o.train.k, "Expert index for --role expert"));
  o.train.experts_opt = unset(
      tr->add_option("--experts", o.train.experts, "Expected K; must match the partition"));
  tr->add_option("--seed", o.train.seed, "Random seed")->required();
  tr->add_option("--schedule", o.train.schedule, "linear or cosine")->required();
  tr->add_option("--t-min", o.train.t_min, "Smallest training time");
  tr->add_option("--steps", o.train.steps, "Optimizer steps");
  tr->add_option("--batch", o.train.batch, "Global batch size (experts get batch / K)");
  tr->add_option("--lr", o.train.lr, "Adam learning rate");
  tr->add_option("--ema", o.train.ema, "EMA decay");
  tr->add_option("--report-every", o.train.report_every, "Metrics row interval");
  o.train.router_steps_opt = unset(tr->add_option("--router-steps", o.train.router_steps, "Router steps (default: --steps)"));
  o.train.router_lr_opt = unset(tr->add_option("--router-lr", o.train.router_lr, "Router learning rate (default: --lr)"));
  add_model_options(tr, o.train.model);
  tr->add_flag("--decentralized", o.train.decentralized,
               "Train all K experts and the router as isolated workers");
  tr->add_option("--mode", o.train.mode, "serial or threads");
  tr->add_option("--teachers", o.train.teachers,
                 "Teacher checkpoint directory for distill (default: <run>/checkpoints)");
  tr->add_option("--inject-fault", o.train.inject_fault, "role:k:step")->group("");

  auto* sa = app.add_subcommand("sample", "Sample from an ensemble or monolith");
  sa->add_option("--strategy", o.sample.strategy,
                 "full, monolith, oracle, top-<k>, sample-<n>, nucleus, threshold")
      ->required();
  o.sample.tau_opt = unset(sa->add_option("--tau", o.sample.tau, "Threshold strategy cutoff"));
  sa->add_option("--p", o.sample.p, "Nucleus mass");
  o.sample.temperature_opt = unset(sa->add_option("--temperature", o.sample.temperature, "Sample/nucleus temperature"));
  o.sample.label_opt = unset(sa->add_option("--label", o.sample.label, "Oracle label for every sample"));
  sa->add_option("--labels", o.sample.labels, "Per-sample oracle labels (index,cluster CSV)");
  sa->add_option("--checkpoints", o.sample.checkpoints,
                 "Checkpoint directory (default: <run>/checkpoints)");
  sa->add_flag("--analytical", o.sample.analytical,
               "Use exact fields of --data partitioned by --partition");
  sa->add_option("--data", o.sample.data, "Dataset CSV for --analytical");
  sa->add_option("--partition", o.sample.partition, "Assignment CSV for --analytical");
  sa->add_option("--schedule", o.sample.schedule,
                 "linear or cosine (required with --analytical)");
  sa->add_option("--t-min", o.sample.t_min, "Final time for --analytical");
  sa->add_option("--n", o.sample.n, "Number of samples")->required();
  sa->add_option("--steps", o.sample.steps, "Integrator steps");
  sa->add_option("--integrator", o.sample.integrator, "euler or heun");
  sa->add_option("--seed", o.sample.seed, "Random seed")->required();
  sa->add_flag("--trajectory", o.sample.trajectory, "Also write the full trajectory");
  sa->add_option("--svg-reference", o.sample.svg_reference,
                 "Dataset CSV to overlay in an SVG scatter plot");

  auto* ev = app.add_subcommand("eval", "Run a named experiment or score a sample file");
  ev->add_option("--experiment", o.eval.experiment,
                 "ddm_vs_monolith, expert_count_sweep, cluster_ablation, distill_compare, "
                 "strategy_table");
  ev->add_option("--samples", o.eval.samples, "Samples CSV to score directly");
  ev->add_option("--reference", o.eval.reference, "Reference dataset CSV for --samples");
  ev->add_option("--seed", o.eval.seed, "Projection seed for --samples");
  ev->add_option("--seeds", o.eval.seeds, "Experiment seeds, comma separated");
  ev->add_option("--shape", o.eval.shape, "Dataset shape");
  o.eval.n_data_opt = unset(ev->add_option("--n-data", o.eval.n_data, "Dataset size"));
  o.eval.blobs_opt = unset(ev->add_option("--blobs", o.eval.blobs, "Number of blobs"));
  o.eval.separation_opt = unset(ev->add_option("--separation", o.eval.separation, "Blob separation"));
  o.eval.noise_opt = unset(ev->add_option("--noise", o.eval.noise, "Blob noise"));
  o.eval.k_opt = unset(ev->add_option("--k", o.eval.k, "Number of experts K"));
  o.eval.m_opt = unset(ev->add_option("--m", o.eval.m, "Fine centroids M"));
  o.eval.steps_opt = unset(ev->add_option("--steps", o.eval.steps, "Expert and monolith steps"));
  o.eval.batch_opt = unset(ev->add_option("--batch", o.eval.batch, "Global batch size"));
  o.eval.lr_opt = unset(ev->add_option("--lr", o.eval.lr, "Learning rate"));
  o.eval.ema_opt = unset(ev->add_option("--ema", o.eval.ema, "EMA decay"));
  o.eval.router_steps_opt = unset(ev->add_option("--router-steps", o.eval.router_steps, "Router steps"));
  o.eval.router_lr_opt = unset(ev->add_option("--router-lr", o.eval.router_lr, "Router learning rate"));
  o.eval.distill_steps_opt = unset(ev->add_option("--distill-steps", o.eval.distill_steps, "Student steps"));
  ev->add_option("--hidden", o.eval.hidden, "Expert hidden widths");
  ev->add_option("--schedule", o.eval.schedule, "linear or cosine");
  o.eval.n_samples_opt = unset(ev->add_option("--n-samples", o.eval.n_samples, "Samples per arm"));
  o.eval.projections_opt =
      ev->add_option("--projections", o.eval.projections, "Sliced-Wasserstein projections");
  o.eval.sampler_steps_opt = unset(ev->add_option("--sampler-steps", o.eval.sampler_steps, "Integrator steps"));
  ev->add_option("--integrator", o.eval.integrator, "euler or heun");
  ev->add_option("--counts", o.eval.counts, "Expert counts for expert_count_sweep");
  ev->add_option("--policies", o.eval.policies, "Strategies for DDM arms, comma separated");
  ev->add_option("--strategies", o.eval.strategies, "Rows for strategy_table");
  ev->add_flag("--analytical", o.eval.analytical, "Use exact fields instead of training");
  ev->add_option("--mode", o.eval.mode, "serial or threads");
  ev->add_option("--cache", o.eval.cache, "Checkpoint cache (default: <run>/checkpoints)");
  ev->add_flag("--require-checkpoints", o.eval.require_checkpoints,
               "Fail instead of training missing arms");
  ev->add_flag("--svg", o.eval.svg, "Write scatter plots of the first seed");

  auto* fl = app.add_subcommand("flops", "Inference cost per sampling step by strategy");
  fl->add_option("--expert-gflops", o.flops.expert, "Expert forward cost")->required();
  fl->add_option("--router-gflops", o.flops.router, "Router forward cost")->required();
  fl->add_option("--k", o.flops.k, "Number of experts K")->required();
  fl->add_flag("--table1", o.flops.table1, "Print the reference strategy table");
  fl->add_option("--strategy", o.flops.strategy, "Single strategy to cost");
}

// ---------------------------------------------------------------------------
// Config overlay

std::string scalar_text(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ",";
      out += scalar_text(item, key);
    }
    return out;
  }
  throw ConfigurationError("config: value of '" + key + "' must be a scalar or list");
}

std::vector<std::pair<std::string, std::string>> read_overlay(const fs::path& path,
                                                              const std::string& command) {
  const std::string text = read_file(path);
  std::vector<std::pair<std::string, std::string>> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigurationError("config " + path.string() + ": " + e.what());
    }
    // A manifest nests the resolved options.
    if (doc.contains("options") && doc["options"].is_object()) {
      if (doc.contains("command") && doc["command"] != command) {
        throw UsageError("config " + path.string() + " is a manifest for '" +
                         doc["command"].get<std::string>() + "', not '" + command + "'");
      }
      doc = doc["options"];
    }
    for (const auto& [key, value] : doc.items()) out.emplace_back(key, scalar_text(value, key));
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError("config " + path.string() + ":" + std::to_string(lineno) +
                               ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out.emplace_back(key, value);
  }
  return out;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

std::string option_key(const CLI::Option* opt) {
  return opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
}

// Appends --key=value for overlay entries the command line did not set.
std::vector<std::string> apply_overlay(const CLI::App& sub, std::vector<std::string> args,
                                       const std::vector<std::pair<std::string, std::string>>& kv) {
  for (auto [key, value] : kv) {
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    std::replace(key.begin(), key.end(), '_', '-');
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "help") {
      throw UsageError("config: unknown key '" + key + "' for command '" + sub.get_name() + "'");
    }
    if (given(opt)) continue;
    if (is_flag(opt)) {
      if (value == "true" || value == "1") {
        args.push_back("--" + key);
      } else if (value != "false" && value != "0") {
        throw UsageError("config: flag '" + key + "' takes true or false, got '" + value + "'");
      }
    } else {
      args.push_back("--" + key + "=" + value);
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// Run directory and manifest

class Run {
 public:
  Run(const Global& g, const CLI::App& sub) : dir_(fs::path(g.runs_root) / g.name), sub_(sub) {}

  const fs::path& dir() const { return dir_; }

  void write(const fs::path& path, const std::string& content) {
    write_file_atomic(path, content);
    track(path);
  }
  void track(const fs::path& path) { outputs_.push_back(path); }

  void write_manifest() const {
    json options = json::object();
    for (const CLI::Option* opt : sub_.get_options()) {
      const std::string key = option_key(opt);
      if (key.empty() || key == "help" || key == "inject-fault") continue;
      if (is_flag(opt)) {
        options[key] = given(opt);
      } else if (given(opt)) {
        options[key] = opt->results().back();
      } else if (!opt->get_default_str().empty()) {
        options[key] = opt->get_default_str();
      }
    }
    json outputs = json::object();
    for (const auto& p : outputs_) {
      outputs[p.generic_string()] = hex64(fnv1a64(read_file(p)));
    }
    json m;
    m["command"] = sub_.get_name();
    m["options"] = std::move(options);
    m["outputs"] = std::move(outputs);
    m["versions"] = {{"dfm", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"checkpoint", kCheckpointVersion}};
    write_file_atomic(dir_ / "manifest" / (sub_.get_name() + ".json"), m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  const CLI::App& sub_;
  std::vector<fs::path> outputs_;
};

// ---------------------------------------------------------------------------
// Shared loading helpers

std::vector<std::size_t> load_assignment(const fs::path& path, std::size_t n) {
  auto a = assignment_from_csv(read_file(path), path.string());
  if (n != 0 && a.size() != n) {
    throw ConfigurationError(path.string() + ": " + std::to_string(a.size()) +
                             " assignments for " + std::to_string(n) + " points");
  }
  return a;
}

Partition partition_from(std::vector<std::size_t> assignment, const fs::path& source) {
  Partition p;
  for (std::size_t c : assignment) p.num_clusters = std::max(p.num_clusters, c + 1);
  p.counts.assign(p.num_clusters, 0);
  for (std::size_t c : assignment) ++p.counts[c];
  for (std::size_t k = 0; k < p.num_clusters; ++k) {
    if (p.counts[k] == 0) {
      throw ConfigurationError(source.string() + ": cluster " + std::to_string(k) + " is empty");
    }
  }
  p.assignment = std::move(assignment);
  p.spec.num_clusters = p.num_clusters;
  return p;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json totals_json(const LedgerTotals& t) {
  json j;
  j["expert_forwards"] = t.expert_forwards;
  j["router_forwards"] = t.router_forwards;
  j["monolith_forwards"] = t.monolith_forwards;
  j["inference_cost"] = t.inference_cost;
  for (Role r : {Role::kExpert, Role::kRouter, Role::kMonolith, Role::kStudent}) {
    const auto i = static_cast<std::size_t>(r);
    j["train_cost"][to_string(r)] = t.train_cost[i];
    j["train_samples"][to_string(r)] = t.train_samples[i];
  }
  return j;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const GenDataOpts& o, Run& run) {
  SyntheticSpec spec;
  spec.shape = synthetic_shape_from_string(o.shape);
  spec.n = o.n;
  spec.dim = o.dim;
  spec.num_blobs = o.blobs;
  spec.separation = o.separation;
  spec.noise = o.noise;
  spec.seed = o.seed;
  const Dataset data = generate(spec);
  const fs::path out = o.out.empty() ? run.dir() / "data" / "dataset.csv" : fs::path(o.out);
  run.write(out, dataset_to_csv(data));
  std::cout << "wrote " << data.size() << " points to " << out.string() << "\n";
  return kExitOk;
}

int cmd_cluster(const ClusterOpts& o, Run& run) {
  const Dataset data = load_dataset(o.data);
  PartitionSpec spec;
  spec.num_clusters = o.k;
  spec.fine_clusters = o.m;
  spec.max_iters = o.max_iters;
  spec.tol = o.tol;
  spec.seed = o.seed;
  spec.mode = partition_mode_from_string(o.mode);
  Partition p;
  try {
    p = make_partition(data.points(), spec);
  } catch (const Error& e) {
    throw ArgumentError(o.data + ": " + e.what());
  }
  const fs::path dir = run.dir() / "partition";
  run.write(dir / "assignment.csv", assignment_to_csv(p.assignment));
  json side;
  side["version"] = 1;
  side["num_clusters"] = p.num_clusters;
  side["fine_clusters"] = p.spec.fine_clusters;
  side["mode"] = to_string(p.spec.mode);
  side["seed"] = p.spec.seed;
  side["max_iters"] = p.spec.max_iters;
  side["tol"] = p.spec.tol;
  side["counts"] = p.counts;
  side["coarse_centroids"] = matrix_json(p.coarse_centroids);
  side["fine_centroids"] = matrix_json(p.fine_centroids);
  run.write(dir / "centroids.json", side.dump(2) + "\n");
  std::cout << "cluster sizes:";
  for (std::size_t c : p.counts) std::cout << " " << c;
  std::cout << "\n";
  return kExitOk;
}

FaultHook parse_fault(const std::string& spec) {
  if (spec.empty()) return {};
  const auto parts = [&] {
    std::vector<std::string> v;
    std::stringstream ss(spec);
    std::string s;
    while (std::getline(ss, s, ':')) v.push_back(s);
    return v;
  }();
  if (parts.size() != 3) throw UsageError("--inject-fault expects role:k:step");
  const Role role = role_from_string(parts[0]);
  const std::size_t k = parse_sizes(parts[1], "--inject-fault").at(0);
  const std::size_t step = parse_sizes(parts[2], "--inject-fault").at(0);
  return [=](Role r, std::size_t kk, std::size_t s) {
    if (r == role && kk == k && s == step) {
      throw WorkerFailureError("injected fault in " + std::string(to_string(r)) + " " +
                               std::to_string(kk) + " at step " + std::to_string(s));
    }
  };
}

std::vector<Checkpoint> load_experts(const fs::path& dir, std::size_t num_experts) {
  std::vector<Checkpoint> out;
  for (std::size_t k = 0; k < num_experts; ++k) {
    const fs::path p = dir / checkpoint_filename(Role::kExpert, k);
    if (!fs::exists(p)) {
      throw ConfigurationError("missing expert checkpoint " + p.string());
    }
    out.push_back(load_checkpoint(p));
  }
  return out;
}

int cmd_train(const TrainOpts& o, Run& run) {
  if (o.role.empty() && !o.decentralized) {
    throw UsageError("train: give --role or --decentralized");
  }
  if (!o.role.empty() && o.decentralized) {
    throw UsageError("train: --role and --decentralized are exclusive");
  }
  const Dataset data = load_dataset(o.data);
  TrainConfig tc;
  tc.steps = o.steps;
  tc.batch_size = o.batch;
  tc.lr = o.lr;
  tc.ema_decay = o.ema;
  tc.seed = o.seed;
  tc.schedule = schedule_kind_from_string(o.schedule);
  tc.t_min = o.t_min;
  tc.loss_report_every = o.report_every;
  tc.validate();
  TrainConfig rc = tc;
  if (given(o.router_steps_opt)) rc.steps = o.router_steps;
  if (given(o.router_lr_opt)) rc.lr = o.router_lr;
  const ModelConfig model = o.model.config();

  const bool needs_partition = o.decentralized || o.role != "monolith";
  std::optional<Partition> partition;
  if (needs_partition) {
    if (o.partition.empty()) {
      throw UsageError("train: --partition is required for " +
                       (o.decentralized ? std::string("--decentralized") : "--role " + o.role));
    }
    partition = partition_from(load_assignment(o.partition, data.size()), o.partition);
    if (given(o.experts_opt) && o.experts != partition->num_clusters) {
      throw ConfigurationError("train: --experts " + std::to_string(o.experts) + " but " +
                               o.partition + " has " + std::to_string(partition->num_clusters) +
                               " clusters");
    }
  }
  const FaultHook fault = parse_fault(o.inject_fault);
  const fs::path dir = run.dir();

  if (o.decentralized) {
    OrchestratorConfig oc;
    oc.expert = tc;
    oc.router = rc;
    oc.model = model;
    oc.mode = run_mode_from_string(o.mode);
    oc.output_dir = dir;
    oc.fault_hook = fault;
    const std::size_t k_total = partition->num_clusters;
    FlopLedger ledger(model.expert_shape(data.dim()).forward_flops(),
                      model.router_shape(data.dim(), k_total).forward_flops());
    const OrchestrationResult r = orchestrate_decentralized(data, *partition, oc, &ledger);
    std::string failures;
    for (const auto& e : r.experts) {
      if (e.ok) {
        run.track(dir / "checkpoints" / checkpoint_filename(Role::kExpert, e.k));
        run.track(dir / "metrics" / ("expert_" + std::to_string(e.k) + ".csv"));
      } else {
        failures += "\n  expert " + std::to_string(e.k) + ": " + e.error;
      }
    }
    if (r.router.ok) {
      run.track(dir / "checkpoints" / checkpoint_filename(Role::kRouter));
      run.track(dir / "metrics" / "router.csv");
    } else {
      failures += "\n  router: " + r.router.error;
    }
    const LedgerTotals totals = ledger.totals();
    json lj = totals_json(totals);
    lj["router_overhead"] = totals.router_overhead();
    run.write(dir / "reports" / "training_ledger.json", lj.dump(2) + "\n");
    std::cout << "trained " << (k_total - r.failed_experts().size()) << " of " << k_total
              << " experts" << (r.router.ok ? " and the router" : "") << "; training cost: experts "
              << totals.train_cost[0] << ", router " << totals.train_cost[1] << "\n";
    if (!failures.empty()) throw WorkerFailureError("workers failed:" + failures);
    return kExitOk;
  }

  StepHook hook;
  const Role hook_role = role_from_string(o.role == "distill" ? "student" : o.role);
  const std::size_t hook_k = hook_role == Role::kExpert ? o.k : 0;
  if (fault) hook = [&](std::size_t s) { fault(hook_role, hook_k, s); };

  TrainResult result;
  std::string stem;
  if (o.role == "monolith") {
    result = train_monolith(data, tc, model.expert_shape(data.dim()), hook);
    stem = "monolith";
  } else if (o.role == "expert") {
    if (!given(o.k_opt)) throw UsageError("train: --role expert needs --k");
    const std::size_t k_total = partition->num_clusters;
    if (o.k >= k_total) {
      throw UsageError("train: --k " + std::to_string(o.k) + " out of range for K = " +
                       std::to_string(k_total));
    }
    const auto members = partition->members();
    result = train_expert(data.subset(members[o.k]), {o.k, k_total, Role::kExpert}, tc,
                          model.expert_shape(data.dim()), hook);
    stem = "expert_" + std::to_string(o.k);
  } else if (o.role == "router") {
    const std::size_t k_total = partition->num_clusters;
    result = train_router(data.with_labels(partition->assignment), k_total, rc,
                          model.router_shape(data.dim(), k_total), hook);
    stem = "router";
  } else if (o.role == "distill") {
    const fs::path tdir = o.teachers.empty() ? dir / "checkpoints" : fs::path(o.teachers);
    std::vector<MlpModel> teachers;
    for (const auto& c : load_experts(tdir, partition->num_clusters)) {
      if (c.num_experts != partition->num_clusters) {
        throw ConfigurationError("teacher " + std::to_string(c.k) + " belongs to K = " +
                                 std::to_string(c.num_experts));
      }
      teachers.push_back(c.model());
    }
    result = train_distilled(data.with_labels(partition->assignment), teachers, tc,
                             model.expert_shape(data.dim()), std::nullopt, hook);
    stem = "student";
  } else {
    throw UsageError("train: unknown role '" + o.role + "' (expert, router, monolith, distill)");
  }
  const fs::path ckpt =
      dir / "checkpoints" / checkpoint_filename(result.checkpoint.role, result.checkpoint.k);
  save_checkpoint(ckpt, result.checkpoint);
  run.track(ckpt);
  run.write(dir / "metrics" / (stem + ".csv"), metrics_to_csv(result.metrics));
  std::cout << "wrote " << ckpt.string() << " (" << result.flops << " training flops)\n";
  return kExitOk;
}

int cmd_sample(const SampleOpts& o, Run& run) {
  EnsemblePolicy policy = policy_from_name(o.strategy);
  if (given(o.tau_opt)) {
    if (policy.strategy != Strategy::kThreshold) throw UsageError("--tau needs --strategy threshold");
    policy.tau = o.tau;
  }
  if (policy.strategy == Strategy::kNucleus && o.strategy == "nucleus") policy.p = o.p;
  if (given(o.temperature_opt)) {
    if (!policy.stochastic()) throw UsageError("--temperature needs a sample or nucleus strategy");
    policy.temperature = o.temperature;
  }
  std::vector<std::size_t> labels;
  if (policy.strategy == Strategy::kOracleLabel) {
    if (given(o.label_opt)) {
      policy.label = o.label;
    } else if (!o.labels.empty()) {
      labels = load_assignment(o.labels, o.n);
    } else {
      throw UsageError("sample: --strategy oracle needs --label or --labels");
    }
  } else if (given(o.label_opt) || !o.labels.empty()) {
    throw UsageError("sample: --label/--labels only apply to --strategy oracle");
  }

  SamplerConfig sc;
  sc.steps = o.steps;
  sc.integrator = integrator_from_string(o.integrator);
  sc.keep_trajectory = o.trajectory;

  std::optional<Ensemble> ensemble;
  std::unique_ptr<MlpVelocity> lone_monolith;
  if (o.analytical) {
    if (o.data.empty() || o.partition.empty() || o.schedule.empty()) {
      throw UsageError("sample --analytical needs --data, --partition and --schedule");
    }
    const Dataset data = load_dataset(o.data);
    Partition p = partition_from(load_assignment(o.partition, data.size()), o.partition);
    sc.schedule = schedule_kind_from_string(o.schedule);
    sc.t_min = o.t_min;
    auto flow = std::make_shared<const AnalyticalFlow>(data, Schedule(sc.schedule, sc.t_min),
                                                       p.assignment, p.num_clusters);
    ensemble.emplace(Ensemble::analytical(flow));
  } else {
    const fs::path dir = o.checkpoints.empty() ? run.dir() / "checkpoints" : fs::path(o.checkpoints);
    std::size_t k_total = 0;
    while (fs::exists(dir / checkpoint_filename(Role::kExpert, k_total))) ++k_total;
    std::optional<Checkpoint> mono;
    if (fs::exists(dir / checkpoint_filename(Role::kMonolith))) {
      mono = load_checkpoint(dir / checkpoint_filename(Role::kMonolith));
    }
    const Checkpoint* schedule_source = nullptr;
    std::vector<Checkpoint> experts;
    std::optional<Checkpoint> router;
    if (k_total > 0 && fs::exists(dir / checkpoint_filename(Role::kRouter))) {
      experts = load_experts(dir, k_total);
      router = load_checkpoint(dir / checkpoint_filename(Role::kRouter));
      ensemble.emplace(Ensemble::from_checkpoints(experts, *router, mono ? &*mono : nullptr));
      schedule_source = &experts.front();
    } else if (policy.strategy == Strategy::kMonolithBypass && mono) {
      lone_monolith = std::make_unique<MlpVelocity>(mono->model());
      schedule_source = &*mono;
    } else {
      throw ConfigurationError("sample: " + dir.string() +
                               " needs expert_<k>.json and router.json checkpoints");
    }
    sc.schedule = schedule_source->schedule;
    sc.t_min = schedule_source->t_min;
    if (!o.schedule.empty() && schedule_kind_from_string(o.schedule) != sc.schedule) {
      throw ConfigurationError("sample: --schedule " + o.schedule +
                               " disagrees with the checkpoints in " + dir.string());
    }
  }
  sc.validate();

  const Rng rng(o.seed);
  SampleResult result;
  json report;
  if (lone_monolith) {
    result = sample(*lone_monolith, sc, o.n, rng);
    const std::uint64_t evals = (sc.integrator == Integrator::kHeun ? 2 : 1) * sc.steps * o.n;
    report["monolith_forwards"] = evals;
    report["inference_cost"] = evals * lone_monolith->forward_cost();
    report["cost_per_step"] = lone_monolith->forward_cost();
  } else {
    policy.validate(ensemble->num_experts());
    ensemble->ledger().reset();
    result = sample(*ensemble, policy, sc, o.n, rng, labels);
    const LedgerTotals t = ensemble->ledger().totals();
    report = totals_json(t);
    report.erase("train_cost");
    report.erase("train_samples");
    const auto fixed = ledger_cost(ensemble->ledger(), policy, ensemble->num_experts());
    report["cost_per_step"] = fixed ? json(*fixed) : json(nullptr);
  }
  const std::string name = policy.name();
  report["strategy"] = name;
  report["n"] = o.n;
  report["steps"] = sc.steps;
  report["integrator"] = to_string(sc.integrator);
  const fs::path sdir = run.dir() / "samples";
  run.write(sdir / (name + ".csv"), samples_to_csv(result.samples));
  if (o.trajectory) run.write(sdir / (name + "_trajectory.csv"), trajectory_to_csv(result));
  run.write(run.dir() / "reports" / ("sample_" + name + ".json"), report.dump(2) + "\n");
  if (!o.svg_reference.empty()) {
    write_file_atomic(sdir / (name + ".svg"),
                      scatter_svg(result.samples, load_dataset(o.svg_reference).points()));
  }
  std::cout << "wrote " << o.n << " samples to " << (sdir / (name + ".csv")).string() << "\n";
  return kExitOk;
}

int eval_direct(const EvalOpts& o, Run& run) {
  if (o.samples.empty() || o.reference.empty()) {
    throw UsageError("eval: give --experiment, or both --samples and --reference");
  }
  const Matrix gen = samples_from_csv(read_file(o.samples), o.samples);
  const Dataset ref = load_dataset(o.reference);
  std::vector<EvalReport> reports;
  EvalReport base;
  base.experiment = "direct";
  base.arm = fs::path(o.samples).stem().string();
  base.n_generated = static_cast<std::size_t>(gen.rows());
  base.n_reference = ref.size();
  base.seed = o.seed;
  EvalReport sw = base;
  sw.metric = "sliced_wasserstein";
  sw.value = sliced_wasserstein(gen, ref.points(), o.projections, Rng(o.seed).split("sw"));
  EvalReport ed = base;
  ed.metric = "energy_distance";
  ed.value = energy_distance(gen, ref.points());
  reports = {sw, ed};
  run.write(run.dir() / "reports" / "eval.json", reports_to_json(reports));
  run.write(run.dir() / "reports" / "eval.csv", reports_to_csv(reports));
  std::cout << "sliced_wasserstein," << format_double(sw.value) << "\nenergy_distance,"
            << format_double(ed.value) << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOpts& o, Run& run) {
  if (o.experiment.empty()) return eval_direct(o, run);
  if (!o.samples.empty() || !o.reference.empty()) {
    throw UsageError("eval: --samples/--reference cannot be combined with --experiment");
  }
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), o.experiment) == names.end()) {
    throw ConfigurationError("unknown experiment '" + o.experiment + "'");
  }
  ExperimentConfig c = default_experiment(o.experiment);
  if (!o.seeds.empty()) {
    c.seeds.clear();
    for (std::size_t s : parse_sizes(o.seeds, "--seeds")) c.seeds.push_back(s);
  }
  if (!o.shape.empty()) c.data.shape = synthetic_shape_from_string(o.shape);
  if (given(o.n_data_opt)) c.data.n = o.n_data;
  if (given(o.blobs_opt)) c.data.num_blobs = o.blobs;
  if (given(o.separation_opt)) c.data.separation = o.separation;
  if (given(o.noise_opt)) c.data.noise = o.noise;
  if (given(o.k_opt)) c.partition.num_clusters = o.k;
  if (given(o.m_opt)) c.partition.fine_clusters = o.m;
  for (TrainConfig* t : {&c.train, &c.router_train, &c.distill_train}) {
    if (given(o.steps_opt)) t->steps = o.steps;
    if (given(o.batch_opt)) t->batch_size = o.batch;
    if (given(o.lr_opt)) t->lr = o.lr;
    if (given(o.ema_opt)) t->ema_decay = o.ema;
    if (!o.schedule.empty()) t->schedule = schedule_kind_from_string(o.schedule);
  }
  if (given(o.router_steps_opt)) c.router_train.steps = o.router_steps;
  if (given(o.router_lr_opt)) c.router_train.lr = o.router_lr;
  if (given(o.distill_steps_opt)) c.distill_train.steps = o.distill_steps;
  if (!o.hidden.empty()) c.model.expert_hidden = parse_sizes(o.hidden, "--hidden");
  c.sampler.schedule = c.train.schedule;
  if (given(o.n_samples_opt)) c.n_samples = o.n_samples;
  if (given(o.projections_opt)) c.n_projections = o.projections;
  if (given(o.sampler_steps_opt)) c.sampler.steps = o.sampler_steps;
  if (!o.integrator.empty()) c.sampler.integrator = integrator_from_string(o.integrator);
  if (!o.counts.empty()) c.expert_counts = parse_sizes(o.counts, "--counts");
  if (!o.policies.empty()) {
    c.ddm_policies.clear();
    for (const auto& n : split_list(o.policies)) c.ddm_policies.push_back(policy_from_name(n));
  }
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& n : split_list(o.strategies)) c.strategies.push_back(policy_from_name(n));
  }
  c.analytical = o.analytical;
  if (!o.mode.empty()) c.mode = run_mode_from_string(o.mode);
  c.cache_dir = o.cache.empty() ? run.dir() / "checkpoints" : fs::path(o.cache);
  c.require_checkpoints = o.require_checkpoints;
  c.validate();

  const ExperimentResult r = run_experiment(c);
  const fs::path dir = run.dir() / "reports";
  run.write(dir / (o.experiment + ".json"), reports_to_json(r.reports));
  run.write(dir / (o.experiment + ".csv"), reports_to_csv(r.reports));
  run.write(dir / (o.experiment + "_table.csv"), r.table_csv);
  if (o.svg) {
    for (const auto& [arm, points] : r.samples) {
      write_file_atomic(dir / (o.experiment + "_" + arm + ".svg"), scatter_svg(points, r.reference));
    }
  }
  std::cout << r.table_csv;
  return kExitOk;
}

int cmd_flops(const FlopsOpts& o, Run& run) {
  if (o.k == 0) throw UsageError("flops: --k must be at least 1");
  const FlopLedger ledger(o.expert, o.router);
  std::vector<CostRow> rows;
  if (o.table1) {
    rows = strategy_cost_table(ledger, o.k);
  } else if (!o.strategy.empty()) {
    const EnsemblePolicy p = policy_from_name(o.strategy);
    p.validate(o.k);
    rows.push_back({p.name(), ledger_cost(ledger, p, o.k)});
  } else {
    throw UsageError("flops: give --table1 or --strategy");
  }
  std::ostringstream os;
  os << "strategy,cost_per_step\n";
  for (const auto& row : rows) {
    os << row.name << "," << (row.cost ? std::to_string(*row.cost) : "variable") << "\n";
  }
  run.write(run.dir() / "reports" / "flops.csv", os.str());
  std::cout << os.str();
  return kExitOk;
}

int dispatch(const CLI::App& app, Options& o) {
  const CLI::App* sub = app.get_subcommands().front();
  Run run(o.global, *sub);
  const std::string& name = sub->get_name();
  int code = kExitOther;
  if (name == "gen-data") code = cmd_gen_data(o.gen, run);
  else if (name == "cluster") code = cmd_cluster(o.cluster, run);
  else if (name == "train") code = cmd_train(o.train, run);
  else if (name == "sample") code = cmd_sample(o.sample, run);
  else if (name == "eval") code = cmd_eval(o.eval, run);
  else if (name == "flops") code = cmd_flops(o.flops, run);
  if (code == kExitOk) run.write_manifest();
  return code;
}

int parse(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? -1 : kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    auto app = std::make_unique<CLI::App>("Decentralized flow matching at desk scale", "dfm");
    auto opts = std::make_unique<Options>();
    build(*app, *opts);
    // Required options may come from the overlay, so the first pass is lenient.
    const bool has_config = std::any_of(args.begin(), args.end(), [](const std::string& a) {
      return a == "--config" || a.rfind("--config=", 0) == 0;
    });
    if (has_config) {
      for (CLI::App* sub : app->get_subcommands({})) {
        for (CLI::Option* opt : sub->get_options()) opt->required(false);
      }
    }
    if (int code = parse(*app, args); code != kExitOk) return code < 0 ? kExitOk : code;
    if (!opts->global.config.empty()) {
      const CLI::App& sub = *app->get_subcommands().front();
      const auto overlay = read_overlay(opts->global.config, sub.get_name());
      args = apply_overlay(sub, std::move(args), overlay);
      app = std::make_unique<CLI::App>("Decentralized flow matching at desk scale", "dfm");
      opts = std::make_unique<Options>();
      build(*app, *opts);
      if (int code = parse(*app, args); code != kExitOk) return code < 0 ? kExitOk : code;
    }
    return dispatch(*app, *opts);
  } catch (const Error& e) {
    std::cerr << "dfm: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dfm: error: " << e.what() << "\n";
    return kExitOther;
  }
}
