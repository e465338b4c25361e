// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/training.hpp"

#include <sstream>
#include <thread>

#include "dfm/io.hpp"
#include "dfm/optim.hpp"

namespace dfm {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "x" : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

MlpShape ModelConfig::expert_shape(std::size_t dim) const {
  MlpShape s;
  s.input_dim = dim;
  s.output_dim = dim;
  s.hidden = expert_hidden;
  s.activation = activation;
  s.time_features = time_features;
  s.validate();
  return s;
}

MlpShape ModelConfig::router_shape(std::size_t dim, std::size_t num_experts) const {
  MlpShape s;
  s.input_dim = dim;
  s.output_dim = num_experts;
  s.hidden = router_hidden;
  if (s.hidden.empty()) {
    for (std::size_t w : expert_hidden) s.hidden.push_back(std::max<std::size_t>(1, w / 2));
  }
  s.activation = activation;
  s.time_features = time_features;
  s.validate();
  return s;
}

std::string ModelConfig::describe() const {
  std::ostringstream os;
  os << "expert_hidden=" << join_sizes(expert_hidden)
     << ";router_hidden=" << join_sizes(router_hidden) << ";activation=" << to_string(activation)
     << ";time_features=" << time_features;
  return os.str();
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ArgumentError("train: batch_size must be positive");
  if (!(lr > 0.0)) throw ArgumentError("train: lr must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ArgumentError("train: ema_decay in [0, 1)");
  if (!(t_min > 0.0 && t_min < 1.0)) throw ArgumentError("train: t_min in (0, 1)");
  if (loss_report_every == 0) throw ArgumentError("train: loss_report_every must be positive");
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "steps=" << steps << ";batch_size=" << batch_size << ";lr=" << format_double(lr)
     << ";ema_decay=" << format_double(ema_decay) << ";seed=" << seed
     << ";schedule=" << to_string(schedule) << ";t_min=" << format_double(t_min);
  return os.str();
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "step,loss,flops\n";
  for (const MetricRow& r : rows) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," + std::to_string(r.flops) +
           "\n";
  }
  return out;
}

namespace {

// Draws t and eps for each row and forms x_t and the conditional target.
struct ForwardDraw {
  Matrix x_t;
  Matrix target;
  std::vector<double> t;
};

ForwardDraw forward_process(const Matrix& x0, Rng& rng, const Schedule& schedule) {
  if (x0.rows() == 0) throw ArgumentError("training batch is empty");
  ForwardDraw d;
  d.t.resize(static_cast<std::size_t>(x0.rows()));
  for (double& t : d.t) t = rng.uniform(schedule.t_min(), 1.0);
  Matrix eps(x0.rows(), x0.cols());
  fill_normal(rng, eps);
  d.x_t.resize(x0.rows(), x0.cols());
  d.target.resize(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const double t = d.t[static_cast<std::size_t>(i)];
    d.x_t.row(i) = schedule.alpha(t) * x0.row(i) + schedule.sigma(t) * eps.row(i);
    d.target.row(i) = schedule.alpha_dot(t) * x0.row(i) + schedule.sigma_dot(t) * eps.row(i);
  }
  return d;
}

// Draws row indices according to the dataset weights.
class IndexSampler {
 public:
  explicit IndexSampler(const Dataset& data) {
    const Vector& w = data.weights();
    uniform_ = (w.array() == w[0]).all();
    if (!uniform_) {
      cumulative_.resize(static_cast<std::size_t>(w.size()));
      double acc = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        acc += w[i];
        cumulative_[static_cast<std::size_t>(i)] = acc;
      }
    }
    n_ = data.size();
  }

  std::size_t draw(Rng& rng) const {
    if (uniform_) return rng.uniform_index(n_);
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), n_ - 1);
  }

 private:
  bool uniform_ = true;
  std::size_t n_ = 0;
  std::vector<double> cumulative_;
};

struct Batch {
  Matrix x0;
  std::vector<std::size_t> labels;
};

Batch draw_batch(const Dataset& data, const IndexSampler& sampler, std::size_t size, Rng& rng) {
  Batch b;
  b.x0.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(data.dim()));
  if (data.has_labels()) b.labels.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t idx = sampler.draw(rng);
    b.x0.row(static_cast<Eigen::Index>(i)) = data.points().row(static_cast<Eigen::Index>(idx));
    if (data.has_labels()) b.labels[i] = data.labels()[idx];
  }
  return b;
}

std::uint64_t config_hash(const TrainConfig& config, const MlpShape& shape, Role role,
                          std::size_t k, std::size_t num_experts) {
  std::ostringstream os;
  os << config.describe() << ";role=" << to_string(role) << ";k=" << k << ";K=" << num_experts
     << ";in=" << shape.input_dim << ";out=" << shape.output_dim
     << ";hidden=" << join_sizes(shape.hidden) << ";act=" << to_string(shape.activation)
     << ";tf=" << shape.time_features;
  return fnv1a64(os.str());
}

// Shared optimizer loop. `loss_fn` computes loss and gradient on one batch.
template <typename LossFn>
TrainResult run_training(MlpModel model, const TrainConfig& config, std::size_t batch,
                         Checkpoint meta, const StepHook& hook, LossFn&& loss_fn) {
  AdamState adam = AdamState::for_params(static_cast<Eigen::Index>(model.param_count()), config.lr);
  EmaState ema = EmaState::from_params(model.params(), config.ema_decay);
  TrainResult out;
  const std::uint64_t step_flops = 3 * model.shape().forward_flops() * batch;
  double smoothed = 0.0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    if (hook) hook(step);
    const LossGrad lg = loss_fn(model);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
      std::ostringstream os;
      os << to_string(meta.role) << " training diverged at step " << step;
      throw NumericalDegeneracyError(os.str());
    }
    adam_step(adam, model.params(), lg.grad);
    ema_update(ema, model.params());
    smoothed = step == 0 ? lg.loss : 0.98 * smoothed + 0.02 * lg.loss;
    out.samples += batch;
    out.flops += step_flops;
    if ((step + 1) % config.loss_report_every == 0 || step + 1 == config.steps) {
      out.metrics.push_back({step + 1, smoothed, out.flops});
    }
  }
  meta.schedule = config.schedule;
  meta.t_min = config.t_min;
  meta.shape = model.shape();
  meta.params_raw = model.params();
  meta.params_ema = ema.shadow;
  meta.step = config.steps;
  meta.seed = config.seed;
  out.checkpoint = std::move(meta);
  return out;
}

}  // namespace

LossGrad cfm_loss(const MlpModel& model, const Matrix& x0, Rng& rng, const Schedule& schedule) {
  const ForwardDraw d = forward_process(x0, rng, schedule);
  return batch_squared_error(model, d.x_t, d.t, d.target);
}

LossGrad router_loss(const MlpModel& model, const Matrix& x0, std::span<const std::size_t> labels,
                     Rng& rng, const Schedule& schedule) {
  if (labels.size() != static_cast<std::size_t>(x0.rows())) {
    throw ShapeError("router_loss: one label per row");
  }
  const ForwardDraw d = forward_process(x0, rng, schedule);
  return batch_cross_entropy(model, d.x_t, d.t, labels);
}

LossGrad distill_loss(const MlpModel& student, std::span<const MlpModel> teachers,
                      const Matrix& x0, std::span<const std::size_t> labels, Rng& rng,
                      const Schedule& schedule) {
  if (labels.size() != static_cast<std::size_t>(x0.rows())) {
    throw ShapeError("distill_loss: one label per row");
  }
  const ForwardDraw d = forward_process(x0, rng, schedule);
  Matrix target(x0.rows(), student.shape().output_dim);
  for (std::size_t k = 0; k < teachers.size(); ++k) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rows.empty()) continue;
    Matrix xs(static_cast<Eigen::Index>(rows.size()), x0.cols());
    std::vector<double> ts(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Eigen::Index>(r)) = d.x_t.row(rows[r]);
      ts[r] = d.t[static_cast<std::size_t>(rows[r])];
    }
    const Matrix v = mlp_forward(teachers[k], xs, ts);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      target.row(rows[r]) = v.row(static_cast<Eigen::Index>(r));
    }
  }
  for (std::size_t label : labels) {
    if (label >= teachers.size()) throw ArgumentError("distill_loss: no teacher for a label");
  }
  return batch_squared_error(student, d.x_t, d.t, target);
}

TrainResult train_expert(const Dataset& shard, const ExpertJob& job, const TrainConfig& config,
                         const MlpShape& shape, const StepHook& hook) {
  config.validate();
  if (shard.size() == 0) throw ArgumentError("train_expert: empty cluster");
  if (job.num_experts == 0 || job.k >= job.num_experts) {
    throw ArgumentError("train_expert: expert index out of range");
  }
  if (config.batch_size % job.num_experts != 0) {
    std::ostringstream os;
    os << "train_expert: global batch " << config.batch_size << " is not divisible by K = "
       << job.num_experts;
    throw ArgumentError(os.str());
  }
  if (shape.input_dim != shard.dim() || shape.output_dim != shard.dim()) {
    throw ShapeError("train_expert: model dimensions do not match the data");
  }
  const std::size_t batch = config.batch_size / job.num_experts;
  const Rng stream = Rng(config.seed).split("expert").split(job.k);
  Rng init_rng = stream.split("init");
  Rng data_rng = stream.split("data");
  const Schedule schedule = config.make_schedule();
  const IndexSampler sampler(shard);

  Checkpoint meta;
  meta.role = job.role;
  meta.k = job.k;
  meta.num_experts = job.num_experts;
  meta.config_hash = config_hash(config, shape, job.role, job.k, job.num_experts);
  return run_training(MlpModel::initialized(shape, init_rng), config, batch, std::move(meta), hook,
                      [&](const MlpModel& model) {
                        const Batch b = draw_batch(shard, sampler, batch, data_rng);
                        return cfm_loss(model, b.x0, data_rng, schedule);
                      });
}

TrainResult train_monolith(const Dataset& data, const TrainConfig& config, const MlpShape& shape,
                           const StepHook& hook) {
  return train_expert(data, {0, 1, Role::kMonolith}, config, shape, hook);
}

TrainResult train_router(const Dataset& data, std::size_t num_experts, const TrainConfig& config,
                         const MlpShape& shape, const StepHook& hook) {
  config.validate();
  if (!data.has_labels()) throw ArgumentError("train_router: dataset has no cluster labels");
  if (num_experts == 0 || data.num_labels() > num_experts) {
    throw ArgumentError("train_router: labels exceed the number of experts");
  }
  if (shape.input_dim != data.dim() || shape.output_dim != num_experts) {
    throw ShapeError("train_router: model dimensions do not match data and K");
  }
  const Rng stream = Rng(config.seed).split("router");
  Rng init_rng = stream.split("init");
  Rng data_rng = stream.split("data");
  const Schedule schedule = config.make_schedule();
  const IndexSampler sampler(data);

  Checkpoint meta;
  meta.role = Role::kRouter;
  meta.num_experts = num_experts;
  meta.config_hash = config_hash(config, shape, Role::kRouter, 0, num_experts);
  return run_training(MlpModel::initialized(shape, init_rng), config, config.batch_size,
                      std::move(meta), hook, [&](const MlpModel& model) {
                        const Batch b = draw_batch(data, sampler, config.batch_size, data_rng);
                        return router_loss(model, b.x0, b.labels, data_rng, schedule);
                      });
}

TrainResult train_distilled(const Dataset& data, std::span<const MlpModel> teachers,
                            const TrainConfig& config, const MlpShape& shape,
                            const std::optional<Vector>& init, const StepHook& hook) {
  config.validate();
  if (!data.has_labels()) throw ArgumentError("train_distilled: dataset has no cluster labels");
  for (std::size_t k = 0; k < data.num_labels(); ++k) {
    if (k >= teachers.size() || teachers[k].param_count() == 0) {
      throw ArgumentError("train_distilled: missing teacher checkpoint for expert " +
                          std::to_string(k));
    }
    if (teachers[k].shape().input_dim != data.dim()) {
      throw ShapeError("train_distilled: teacher dimension does not match the data");
    }
  }
  if (shape.input_dim != data.dim() || shape.output_dim != data.dim()) {
    throw ShapeError("train_distilled: student dimensions do not match the data");
  }
  const Rng stream = Rng(config.seed).split("student");
  Rng init_rng = stream.split("init");
  Rng data_rng = stream.split("data");
  MlpModel student = MlpModel::initialized(shape, init_rng);
  if (init) student.set_params(*init);
  const Schedule schedule = config.make_schedule();
  const IndexSampler sampler(data);

  Checkpoint meta;
  meta.role = Role::kStudent;
  meta.num_experts = 1;
  meta.config_hash = config_hash(config, shape, Role::kStudent, 0, teachers.size());
  return run_training(std::move(student), config, config.batch_size, std::move(meta), hook,
                      [&](const MlpModel& model) {
                        const Batch b = draw_batch(data, sampler, config.batch_size, data_rng);
                        return distill_loss(model, teachers, b.x0, b.labels, data_rng, schedule);
                      });
}

const char* to_string(RunMode mode) { return mode == RunMode::kSerial ? "serial" : "threads"; }

RunMode run_mode_from_string(const std::string& name) {
  if (name == "serial") return RunMode::kSerial;
  if (name == "threads" || name == "concurrent") return RunMode::kThreads;
  throw ArgumentError("unknown run mode '" + name + "'");
}

bool OrchestrationResult::all_ok() const {
  if (!router.ok) return false;
  for (const auto& e : experts) {
    if (!e.ok) return false;
  }
  return true;
}

std::vector<std::size_t> OrchestrationResult::failed_experts() const {
  std::vector<std::size_t> out;
  for (const auto& e : experts) {
    if (!e.ok) out.push_back(e.k);
  }
  return out;
}

namespace {

void run_worker(WorkerOutcome& outcome, const std::function<TrainResult()>& body,
                const OrchestratorConfig& config, FlopLedger* ledger) {
  try {
    TrainResult r = body();
    if (config.output_dir) {
      const auto dir = *config.output_dir;
      save_checkpoint(dir / "checkpoints" / checkpoint_filename(outcome.role, outcome.k), r.checkpoint);
      const std::string stem = outcome.role == Role::kExpert
                                   ? "expert_" + std::to_string(outcome.k)
                                   : std::string(to_string(outcome.role));
      write_file_atomic(dir / "metrics" / (stem + ".csv"), metrics_to_csv(r.metrics));
    }
    if (ledger) ledger->record_training(outcome.role, r.samples, r.flops);
    outcome.result = std::move(r);
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
    outcome.result.reset();
  }
}

}  // namespace

OrchestrationResult orchestrate_decentralized(const Dataset& data, const Partition& partition,
                                              const OrchestratorConfig& config,
                                              FlopLedger* ledger) {
  const std::size_t k_total = partition.num_clusters;
  if (k_total == 0 || partition.assignment.size() != data.size()) {
    throw ArgumentError("orchestrate: partition does not match the dataset");
  }
  config.expert.validate();
  config.router.validate();
  if (config.expert.batch_size % k_total != 0) {
    throw ArgumentError("orchestrate: global batch must be divisible by K");
  }
  const auto members = partition.members();
  for (std::size_t k = 0; k < k_total; ++k) {
    if (members[k].empty()) {
      throw ArgumentError("orchestrate: cluster " + std::to_string(k) + " is empty");
    }
  }
  const MlpShape expert_shape = config.model.expert_shape(data.dim());
  const MlpShape router_shape = config.model.router_shape(data.dim(), k_total);

  OrchestrationResult result;
  result.experts.resize(k_total);
  std::vector<std::function<void()>> jobs;
  for (std::size_t k = 0; k < k_total; ++k) {
    WorkerOutcome& outcome = result.experts[k];
    outcome.role = Role::kExpert;
    outcome.k = k;
    jobs.emplace_back([&, k] {
      run_worker(outcome, [&] {
        // The worker sees only its own shard.
        const Dataset shard = data.subset(members[k]);
        StepHook hook;
        if (config.fault_hook) hook = [&](std::size_t s) { config.fault_hook(Role::kExpert, k, s); };
        return train_expert(shard, {k, k_total, Role::kExpert}, config.expert, expert_shape, hook);
      }, config, ledger);
    });
  }
  result.router.role = Role::kRouter;
  jobs.emplace_back([&] {
    run_worker(result.router, [&] {
      const Dataset labelled = data.with_labels(partition.assignment);
      StepHook hook;
      if (config.fault_hook) hook = [&](std::size_t s) { config.fault_hook(Role::kRouter, 0, s); };
      return train_router(labelled, k_total, config.router, router_shape, hook);
    }, config, ledger);
  });

  if (config.mode == RunMode::kSerial) {
    for (auto& job : jobs) job();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs.size());
    for (auto& job : jobs) threads.emplace_back(job);
    for (auto& th : threads) th.join();
  }
  return result;
}

}  // namespace dfm
