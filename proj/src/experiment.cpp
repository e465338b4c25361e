// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/experiment.hpp"

#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "dfm/analytical_flow.hpp"
#include "dfm/ensemble.hpp"
#include "dfm/io.hpp"
#include "dfm/metrics.hpp"

namespace dfm {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "ddm_vs_monolith", "expert_count_sweep", "cluster_ablation", "distill_compare",
      "strategy_table"};
  return names;
}

void ExperimentConfig::validate() const {
  bool known = false;
  for (const auto& n : experiment_names()) known = known || n == name;
  if (!known) throw ConfigurationError("unknown experiment '" + name + "'");
  if (seeds.empty()) throw ConfigurationError("experiment needs at least one seed");
  if (ddm_policies.empty()) throw ConfigurationError("experiment needs a DDM policy");
  if (n_samples == 0 || n_projections == 0) {
    throw ConfigurationError("n_samples and n_projections must be positive");
  }
  if (require_checkpoints && !cache_dir && !analytical) {
    throw ConfigurationError("require_checkpoints needs a checkpoint directory");
  }
  data.validate();
  train.validate();
  router_train.validate();
  distill_train.validate();
  sampler.validate();
}

std::string ExperimentConfig::describe() const {
  std::ostringstream os;
  os << "name=" << name << ";seeds=";
  for (auto s : seeds) os << s << ",";
  os << ";data=" << data.describe() << ";holdout=" << format_double(holdout_fraction)
     << ";K=" << partition.num_clusters << ";M=" << partition.fine_clusters
     << ";mode=" << to_string(partition.mode) << ";model=" << model.describe()
     << ";train=" << train.describe() << ";router=" << router_train.describe()
     << ";distill=" << distill_train.describe() << ";sampler=" << sampler.steps << "/"
     << to_string(sampler.integrator) << ";n_samples=" << n_samples
     << ";n_projections=" << n_projections << ";policies=";
  for (const auto& p : ddm_policies) os << p.name() << ",";
  os << ";strategies=";
  for (const auto& p : strategies) os << p.name() << ",";
  os << ";counts=";
  for (auto k : expert_counts) os << k << ",";
  os << ";analytical=" << analytical;
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(describe()); }

bool ExperimentResult::has(const std::string& arm, const std::string& metric) const {
  for (const auto& r : reports) {
    if (r.arm == arm && r.metric == metric) return true;
  }
  return false;
}

double ExperimentResult::mean(const std::string& arm, const std::string& metric) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : reports) {
    if (r.arm == arm && r.metric == metric) {
      acc += r.value;
      ++n;
    }
  }
  if (n == 0) throw ArgumentError("no report for arm '" + arm + "' metric '" + metric + "'");
  return acc / static_cast<double>(n);
}

std::vector<EnsemblePolicy> reference_strategies(std::size_t num_experts) {
  std::vector<EnsemblePolicy> out = {EnsemblePolicy::monolith(), EnsemblePolicy::oracle(),
                                     EnsemblePolicy::full()};
  for (std::size_t k = 1; k <= 3 && k <= num_experts; ++k) out.push_back(EnsemblePolicy::top_k(k));
  for (std::size_t n = 1; n <= 3 && n <= num_experts; ++n) out.push_back(EnsemblePolicy::sample(n));
  for (double tau : {0.01, 0.05, 0.1}) out.push_back(EnsemblePolicy::threshold(tau));
  for (double temp : {0.5, 1.0, 2.0}) out.push_back(EnsemblePolicy::nucleus(0.9, temp));
  return out;
}

ExperimentConfig default_experiment(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.data.shape = SyntheticShape::kBlobs;
  c.data.n = 5000;
  c.data.dim = 2;
  c.data.num_blobs = 8;
  c.data.separation = 10.0;
  c.data.noise = 1.0;
  c.partition.num_clusters = 8;
  c.partition.fine_clusters = 64;
  c.model.expert_hidden = {64, 64};
  c.train.steps = 4000;
  c.train.batch_size = 256;
  c.train.lr = 1e-4;
  c.train.ema_decay = 0.999;
  c.router_train = c.train;
  c.distill_train = c.train;
  c.validate();
  return c;
}

namespace {

struct RunData {
  Dataset train;
  Dataset heldout;
};

RunData prepare(const ExperimentConfig& cfg, std::uint64_t seed) {
  SyntheticSpec spec = cfg.data;
  spec.seed = seed;
  Split s = holdout_split(generate(spec), cfg.holdout_fraction, Rng(seed).split("split"));
  if (s.heldout.size() == 0) throw ConfigurationError("held-out split is empty");
  return {std::move(s.train), std::move(s.heldout)};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t training_cost(const MlpShape& shape, std::size_t batch, std::size_t steps) {
  return 3 * shape.forward_flops() * batch * steps;
}

struct DdmArm {
  Partition partition;
  std::vector<Checkpoint> experts;
  Checkpoint router;
  std::uint64_t train_flops = 0;
  std::shared_ptr<const AnalyticalFlow> flow;  // analytical mode
};

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg) {
    sampler_ = cfg.sampler;
    sampler_.schedule = cfg.train.schedule;
    sampler_.t_min = cfg.train.t_min;
  }

  ExperimentResult run() {
    if (cfg_.name == "ddm_vs_monolith") {
      ddm_vs_monolith();
    } else if (cfg_.name == "expert_count_sweep") {
      expert_count_sweep();
    } else if (cfg_.name == "cluster_ablation") {
      cluster_ablation();
    } else if (cfg_.name == "distill_compare") {
      distill_compare();
    } else {
      strategy_table();
    }
    result_.table_csv = summary_table();
    return std::move(result_);
  }

 private:
  Partition partition_for(const RunData& run, std::uint64_t seed, std::size_t k,
                          PartitionMode mode) const {
    PartitionSpec ps = cfg_.partition;
    ps.num_clusters = k;
    ps.seed = seed;
    ps.mode = mode;
    return make_partition(run.train.points(), ps);
  }

  std::string base_key(std::uint64_t seed) const {
    std::ostringstream os;
    os << cfg_.data.describe() << ";run_seed=" << seed
       << ";holdout=" << format_double(cfg_.holdout_fraction) << ";model=" << cfg_.model.describe();
    return os.str();
  }

  std::optional<fs::path> arm_dir(const std::string& kind, const std::string& key) const {
    if (!cfg_.cache_dir) return std::nullopt;
    return *cfg_.cache_dir / (kind + "-" + hex64(fnv1a64(key)));
  }

  [[noreturn]] void missing(const std::string& arm, std::uint64_t seed, const fs::path& where) const {
    std::ostringstream os;
    os << "missing checkpoints for arm '" << arm << "' (seed " << seed << "): expected them in "
       << where.string();
    throw ConfigurationError(os.str());
  }

  DdmArm ddm(const RunData& run, std::uint64_t seed, std::size_t k, PartitionMode mode,
             const std::string& arm) const {
    DdmArm out;
    out.partition = partition_for(run, seed, k, mode);
    if (cfg_.analytical) {
      out.flow = std::make_shared<AnalyticalFlow>(run.train, cfg_.train.make_schedule(),
                                                  out.partition.assignment, k);
      return out;
    }
    TrainConfig et = cfg_.train;
    et.seed = seed;
    TrainConfig rt = cfg_.router_train;
    rt.seed = seed;
    const MlpShape es = cfg_.model.expert_shape(run.train.dim());
    const MlpShape rs = cfg_.model.router_shape(run.train.dim(), k);
    out.train_flops = training_cost(es, et.batch_size / k, et.steps) * k +
                      training_cost(rs, rt.batch_size, rt.steps);

    std::ostringstream key;
    key << base_key(seed) << ";ddm;K=" << k << ";M=" << cfg_.partition.fine_clusters
        << ";mode=" << to_string(mode) << ";iters=" << cfg_.partition.max_iters
        << ";tol=" << format_double(cfg_.partition.tol) << ";expert=" << et.describe()
        << ";router=" << rt.describe();
    const auto dir = arm_dir("ddm", key.str());
    if (dir) {
      bool complete = fs::exists(*dir / "checkpoints" / checkpoint_filename(Role::kRouter));
      for (std::size_t e = 0; e < k && complete; ++e) {
        complete = fs::exists(*dir / "checkpoints" / checkpoint_filename(Role::kExpert, e));
      }
      if (complete) {
        for (std::size_t e = 0; e < k; ++e) {
          out.experts.push_back(
              load_checkpoint(*dir / "checkpoints" / checkpoint_filename(Role::kExpert, e)));
        }
        out.router = load_checkpoint(*dir / "checkpoints" / checkpoint_filename(Role::kRouter));
        return out;
      }
    }
    if (cfg_.require_checkpoints) missing(arm, seed, dir.value_or(fs::path()));
    OrchestratorConfig oc;
    oc.expert = et;
    oc.router = rt;
    oc.model = cfg_.model;
    oc.mode = cfg_.mode;
    oc.output_dir = dir;
    const OrchestrationResult res = orchestrate_decentralized(run.train, out.partition, oc);
    if (!res.all_ok()) {
      std::ostringstream os;
      os << "arm '" << arm << "': worker failure";
      for (const auto& e : res.experts) {
        if (!e.ok) os << "; expert " << e.k << ": " << e.error;
      }
      if (!res.router.ok) os << "; router: " << res.router.error;
      throw WorkerFailureError(os.str());
    }
    for (const auto& e : res.experts) out.experts.push_back(e.result->checkpoint);
    out.router = res.router.result->checkpoint;
    return out;
  }

  Ensemble ensemble_of(const DdmArm& arm, const Checkpoint* monolith = nullptr) const {
    if (arm.flow) return Ensemble::analytical(arm.flow);
    return Ensemble::from_checkpoints(arm.experts, arm.router, monolith);
  }

  // Monolith checkpoint trained on the whole training split with the global batch.
  std::pair<Checkpoint, std::uint64_t> monolith(const RunData& run, std::uint64_t seed,
                                                const std::string& arm) const {
    TrainConfig mt = cfg_.train;
    mt.seed = seed;
    const MlpShape shape = cfg_.model.expert_shape(run.train.dim());
    const std::uint64_t flops = training_cost(shape, mt.batch_size, mt.steps);
    const auto dir = arm_dir("monolith", base_key(seed) + ";monolith;" + mt.describe());
    const fs::path file = dir ? *dir / "checkpoints" / checkpoint_filename(Role::kMonolith) : fs::path();
    if (dir && fs::exists(file)) return {load_checkpoint(file), flops};
    if (cfg_.require_checkpoints) missing(arm, seed, dir.value_or(fs::path()));
    TrainResult r = train_monolith(run.train, mt, shape);
    if (dir) {
      save_checkpoint(file, r.checkpoint);
      write_file_atomic(*dir / "metrics" / "monolith.csv", metrics_to_csv(r.metrics));
    }
    return {r.checkpoint, flops};
  }

  std::vector<std::size_t> oracle_labels(const Partition& part, std::uint64_t seed) const {
    Rng r = Rng(seed).split("oracle-labels");
    std::vector<double> cumulative;
    double acc = 0.0;
    for (std::size_t c : part.counts) cumulative.push_back(acc += static_cast<double>(c));
    std::vector<std::size_t> labels(cfg_.n_samples);
    for (auto& l : labels) {
      const double u = r.uniform() * acc;
      l = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                   cumulative.begin());
      l = std::min(l, part.counts.size() - 1);
    }
    return labels;
  }

  Rng sampler_rng(std::uint64_t seed) const { return Rng(seed).split("sampler"); }

  void score(const std::string& arm, std::uint64_t seed, const Matrix& samples,
             const RunData& run, std::uint64_t sampling_flops, std::uint64_t training_flops) {
    const Matrix& ref = run.heldout.points();
    EvalReport base;
    base.experiment = cfg_.name;
    base.arm = arm;
    base.n_generated = static_cast<std::size_t>(samples.rows());
    base.n_reference = static_cast<std::size_t>(ref.rows());
    base.seed = seed;
    base.config_hash = cfg_.hash();
    base.sampling_flops = sampling_flops;
    base.training_flops = training_flops;
    EvalReport sw = base;
    sw.metric = "sliced_wasserstein";
    sw.value = sliced_wasserstein(samples, ref, cfg_.n_projections, Rng(seed).split("sw"));
    EvalReport ed = base;
    ed.metric = "energy_distance";
    ed.value = energy_distance(samples, ref);
    result_.reports.push_back(sw);
    result_.reports.push_back(ed);
    if (seed == cfg_.seeds.front()) {
      result_.samples.emplace_back(arm, samples);
      result_.reference = ref;
    }
    if (!cost_.count(arm)) cost_[arm] = "";
  }

  void add_metric(const std::string& arm, std::uint64_t seed, const std::string& metric,
                  double value) {
    EvalReport r;
    r.experiment = cfg_.name;
    r.arm = arm;
    r.metric = metric;
    r.value = value;
    r.seed = seed;
    r.config_hash = cfg_.hash();
    result_.reports.push_back(r);
  }

  Matrix sample_policy(const Ensemble& ens, const EnsemblePolicy& policy, const DdmArm& arm,
                       std::uint64_t seed, std::uint64_t* flops) {
    ens.ledger().reset();
    std::vector<std::size_t> labels;
    if (policy.strategy == Strategy::kOracleLabel) labels = oracle_labels(arm.partition, seed);
    Matrix s = sample(ens, policy, sampler_, cfg_.n_samples, sampler_rng(seed), labels).samples;
    *flops = ens.ledger().totals().inference_cost;
    return s;
  }

  void note_cost(const std::string& arm, const Ensemble& ens, const EnsemblePolicy& policy) {
    const auto c = ledger_cost(ens.ledger(), policy, ens.num_experts());
    if (c) {
      cost_[arm] = std::to_string(*c);
    } else {
      // Realized mean cost per sample per field evaluation.
      const auto t = ens.ledger().totals();
      const double evals = static_cast<double>(cfg_.n_samples) *
                           static_cast<double>(sampler_.steps + 1) *
                           (sampler_.integrator == Integrator::kHeun ? 2.0 : 1.0);
      std::ostringstream os;
      os << static_cast<double>(t.inference_cost) / evals;
      cost_[arm] = os.str();
    }
  }

  void ddm_arm_policies(const DdmArm& arm, const RunData& run, std::uint64_t seed,
                        const std::string& prefix, bool all_policies) {
    const Ensemble ens = ensemble_of(arm);
    const std::size_t count = all_policies ? cfg_.ddm_policies.size() : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const EnsemblePolicy& p = cfg_.ddm_policies[i];
      std::uint64_t flops = 0;
      const Matrix s = sample_policy(ens, p, arm, seed, &flops);
      const std::string name = prefix.empty() ? "ddm-" + p.name() : prefix;
      score(name, seed, s, run, flops, arm.train_flops);
      note_cost(name, ens, p);
    }
  }

  void monolith_arm(const RunData& run, std::uint64_t seed) {
    std::unique_ptr<VelocityField> field;
    std::uint64_t train_flops = 0;
    if (cfg_.analytical) {
      field = std::make_unique<AnalyticalMarginal>(
          std::make_shared<AnalyticalFlow>(run.train, cfg_.train.make_schedule()));
    } else {
      auto [ckpt, flops] = monolith(run, seed, "monolith");
      field = std::make_unique<MlpVelocity>(ckpt.model());
      train_flops = flops;
    }
    const Matrix s = sample(*field, sampler_, cfg_.n_samples, sampler_rng(seed)).samples;
    const std::uint64_t evals = cfg_.n_samples * (sampler_.steps + 1) *
                                (sampler_.integrator == Integrator::kHeun ? 2 : 1);
    score("monolith", seed, s, run, evals * field->forward_cost(), train_flops);
    cost_["monolith"] = std::to_string(field->forward_cost());
  }

  void ddm_vs_monolith() {
    for (std::uint64_t seed : cfg_.seeds) {
      const RunData run = prepare(cfg_, seed);
      monolith_arm(run, seed);
      const DdmArm arm = ddm(run, seed, cfg_.partition.num_clusters, PartitionMode::kFeatureKMeans,
                             "ddm-" + cfg_.ddm_policies.front().name());
      ddm_arm_policies(arm, run, seed, "", true);
    }
  }

  void expert_count_sweep() {
    for (std::uint64_t seed : cfg_.seeds) {
      const RunData run = prepare(cfg_, seed);
      for (std::size_t k : cfg_.expert_counts) {
        const std::string name = "ddm-K" + std::to_string(k);
        const DdmArm arm = ddm(run, seed, k, PartitionMode::kFeatureKMeans, name);
        ddm_arm_policies(arm, run, seed, name, false);
      }
    }
  }

  void cluster_ablation() {
    for (std::uint64_t seed : cfg_.seeds) {
      const RunData run = prepare(cfg_, seed);
      const std::size_t k = cfg_.partition.num_clusters;
      const DdmArm feat = ddm(run, seed, k, PartitionMode::kFeatureKMeans, "feature-kmeans");
      ddm_arm_policies(feat, run, seed, "feature-kmeans", false);
      const DdmArm rnd = ddm(run, seed, k, PartitionMode::kRandom, "random");
      ddm_arm_policies(rnd, run, seed, "random", false);
    }
  }

  void distill_compare() {
    if (cfg_.analytical) {
      throw ConfigurationError("distill_compare needs trained teachers; drop --analytical");
    }
    const EnsemblePolicy& teacher_policy = cfg_.ddm_policies.front();
    if (teacher_policy.stochastic()) {
      throw ConfigurationError("distill_compare needs a deterministic teacher policy");
    }
    for (std::uint64_t seed : cfg_.seeds) {
      const RunData run = prepare(cfg_, seed);
      const std::size_t k = cfg_.partition.num_clusters;
      const std::string teacher_name = "teacher-" + teacher_policy.name();
      const DdmArm teacher = ddm(run, seed, k, PartitionMode::kFeatureKMeans, teacher_name);
      ddm_arm_policies(teacher, run, seed, teacher_name, false);

      TrainConfig st = cfg_.distill_train;
      st.seed = seed;
      const MlpShape shape = cfg_.model.expert_shape(run.train.dim());
      std::ostringstream key;
      key << base_key(seed) << ";student;K=" << k << ";teacher="
          << hex64(teacher.router.config_hash);
      for (const auto& e : teacher.experts) key << "," << hex64(fnv1a64(checkpoint_to_json(e)));
      key << ";" << st.describe();
      const auto dir = arm_dir("student", key.str());
      const fs::path file =
          dir ? *dir / "checkpoints" / checkpoint_filename(Role::kStudent) : fs::path();
      Checkpoint student;
      if (dir && fs::exists(file)) {
        student = load_checkpoint(file);
      } else {
        if (cfg_.require_checkpoints) missing("student", seed, dir.value_or(fs::path()));
        std::vector<MlpModel> teachers;
        for (const auto& e : teacher.experts) teachers.push_back(e.model());
        const Dataset labelled = run.train.with_labels(teacher.partition.assignment);
        TrainResult r = train_distilled(labelled, teachers, st, shape);
        student = r.checkpoint;
        if (dir) {
          save_checkpoint(file, student);
          write_file_atomic(*dir / "metrics" / "student.csv", metrics_to_csv(r.metrics));
        }
      }
      const MlpVelocity field(student.model());
      const Matrix s = sample(field, sampler_, cfg_.n_samples, sampler_rng(seed)).samples;
      const std::uint64_t evals = cfg_.n_samples * (sampler_.steps + 1) *
                                  (sampler_.integrator == Integrator::kHeun ? 2 : 1);
      score("student", seed, s, run, evals * field.forward_cost(),
            training_cost(shape, st.batch_size, st.steps));
      cost_["student"] = std::to_string(field.forward_cost());

      const Ensemble ens = ensemble_of(teacher);
      const ProbeSet probes = forward_probes(run.train, cfg_.train.make_schedule(),
                                             cfg_.probe_times, cfg_.probes_per_time,
                                             Rng(seed).split("distill-probes"));
      const double rms = flow_rms(
          [&](const Matrix& x, double t, std::size_t) { return field.velocity(x, t); },
          [&](const Matrix& x, double t, std::size_t) { return ens.flow(x, t, teacher_policy); },
          probes);
      add_metric("student", seed, "flow_rms_to_teacher", rms);
    }
  }

  void strategy_table() {
    for (std::uint64_t seed : cfg_.seeds) {
      const RunData run = prepare(cfg_, seed);
      const std::size_t k = cfg_.partition.num_clusters;
      const DdmArm arm = ddm(run, seed, k, PartitionMode::kFeatureKMeans, "ddm");
      const auto policies = cfg_.strategies.empty() ? reference_strategies(k) : cfg_.strategies;
      std::optional<Checkpoint> mono;
      std::uint64_t mono_flops = 0;
      for (const auto& p : policies) {
        if (p.strategy == Strategy::kMonolithBypass && !cfg_.analytical && !mono) {
          auto [ckpt, flops] = monolith(run, seed, "monolith");
          mono = ckpt;
          mono_flops = flops;
        }
      }
      const Ensemble ens = ensemble_of(arm, mono ? &*mono : nullptr);
      for (const auto& p : policies) {
        std::uint64_t flops = 0;
        const Matrix s = sample_policy(ens, p, arm, seed, &flops);
        const bool is_mono = p.strategy == Strategy::kMonolithBypass;
        score(p.name(), seed, s, run, flops, is_mono ? mono_flops : arm.train_flops);
        note_cost(p.name(), ens, p);
      }
    }
  }

  std::string summary_table() const {
    std::vector<std::string> arms;
    for (const auto& r : result_.reports) {
      if (std::find(arms.begin(), arms.end(), r.arm) == arms.end()) arms.push_back(r.arm);
    }
    std::vector<std::string> metrics;
    for (const auto& r : result_.reports) {
      if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) {
        metrics.push_back(r.metric);
      }
    }
    std::string out = "arm,cost_per_step,training_flops";
    for (const auto& m : metrics) out += "," + m + "_mean";
    out += ",seeds\n";
    for (const auto& arm : arms) {
      std::uint64_t train_flops = 0;
      std::size_t seeds = 0;
      for (const auto& r : result_.reports) {
        if (r.arm == arm && r.metric == "sliced_wasserstein") {
          train_flops = r.training_flops;
          ++seeds;
        }
      }
      const auto it = cost_.find(arm);
      out += arm + "," + (it == cost_.end() ? "" : it->second) + "," + std::to_string(train_flops);
      for (const auto& m : metrics) {
        out += ",";
        if (result_.has(arm, m)) out += format_double(result_.mean(arm, m));
      }
      out += "," + std::to_string(seeds) + "\n";
    }
    return out;
  }

  const ExperimentConfig& cfg_;
  SamplerConfig sampler_;
  ExperimentResult result_;
  std::map<std::string, std::string> cost_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return Runner(config).run();
}

std::string reports_to_json(const std::vector<EvalReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back({{"experiment", r.experiment},
                   {"arm", r.arm},
                   {"metric", r.metric},
                   {"value", r.value},
                   {"n_generated", r.n_generated},
                   {"n_reference", r.n_reference},
                   {"seed", r.seed},
                   {"config_hash", hex64(r.config_hash)},
                   {"sampling_flops", r.sampling_flops},
                   {"training_flops", r.training_flops},
                   {"note", "FID stand-in"}});
  }
  return arr.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::string out =
      "experiment,arm,metric,value,n_generated,n_reference,seed,config_hash,sampling_flops,"
      "training_flops\n";
  for (const auto& r : reports) {
    out += r.experiment + "," + r.arm + "," + r.metric + "," + format_double(r.value) + "," +
           std::to_string(r.n_generated) + "," + std::to_string(r.n_reference) + "," +
           std::to_string(r.seed) + "," + hex64(r.config_hash) + "," +
           std::to_string(r.sampling_flops) + "," + std::to_string(r.training_flops) + "\n";
  }
  return out;
}

std::string scatter_svg(const Matrix& generated, const Matrix& reference) {
  if (generated.cols() < 2 || reference.cols() < 2) {
    throw ArgumentError("scatter_svg: needs at least two dimensions");
  }
  double lo_x = std::min(generated.col(0).minCoeff(), reference.col(0).minCoeff());
  double hi_x = std::max(generated.col(0).maxCoeff(), reference.col(0).maxCoeff());
  double lo_y = std::min(generated.col(1).minCoeff(), reference.col(1).minCoeff());
  double hi_y = std::max(generated.col(1).maxCoeff(), reference.col(1).maxCoeff());
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double size = 480.0, pad = 10.0;
  auto px = [&](double v, double lo) { return pad + (v - lo) / span * size; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\""
     << size + 2 * pad << "\">\n";
  auto dots = [&](const Matrix& m, const char* color) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      os << "<circle cx=\"" << px(m(i, 0), lo_x) << "\" cy=\"" << size + 2 * pad - px(m(i, 1), lo_y)
         << "\" r=\"1.2\" fill=\"" << color << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  dots(reference, "#888888");
  dots(generated, "#1f5fbf");
  os << "</svg>\n";
  return os.str();
}

}  // namespace dfm
