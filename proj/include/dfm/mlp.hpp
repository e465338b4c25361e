// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small time-conditioned feed-forward network with hand-written reverse-mode
// gradients. Used for expert denoisers, routers and distilled students.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dfm/numerics.hpp"

namespace dfm {

enum class Activation { kTanh, kSilu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpShape {
  std::size_t input_dim = 0;   // data dimension, excluding time features
  std::size_t output_dim = 0;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::kTanh;
  std::size_t time_features = 16;  // even; sin/cos pairs

  // [input_dim + time_features, hidden..., output_dim]
  std::vector<std::size_t> layer_dims() const;
  std::size_t param_count() const;
  // Multiply-adds count twice, bias adds once.
  std::size_t forward_flops() const;
  void validate() const;
  bool operator==(const MlpShape&) const = default;
};

// Parameters live in one flat vector: per layer, W (out x in, row-major)
// followed by b (out).
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(MlpShape shape);

  // Uniform Glorot init for hidden layers; the output layer starts at zero
  // so an untrained router is exactly uniform and an untrained denoiser
  // predicts zero velocity.
  static MlpModel initialized(MlpShape shape, Rng& rng);

  const MlpShape& shape() const { return shape_; }
  std::size_t num_layers() const { return offsets_.size(); }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  void set_params(const Vector& p);

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;

 private:
  MlpShape shape_;
  Vector params_;
  std::vector<std::size_t> offsets_;
};

// [sin(pi k t), cos(pi k t)] for k = 1..count/2, one row per t. Injective on [0, 1].
Matrix time_embedding(std::span<const double> t, std::size_t count);

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer (post-activation of previous)
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
};

// Batched forward: one row of x per sample, t[i] is the time of row i.
Matrix mlp_forward(const MlpModel& model, const Matrix& x, std::span<const double> t,
                   ForwardCache* cache = nullptr);
Vector mlp_forward(const MlpModel& model, std::span<const double> x, double t);

// Accumulates dLoss/dparams into grad given dLoss/doutput.
void mlp_backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_out,
                  Vector& grad);

enum class LossKind { kSquaredError, kCrossEntropy };

struct LossSpec {
  LossKind kind = LossKind::kSquaredError;
  Vector target;          // squared error
  std::size_t label = 0;  // cross entropy

  static LossSpec squared_error(Vector target);
  static LossSpec cross_entropy(std::size_t label);
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

// Single-sample loss and gradient: ||f(x,t) - target||^2 or -log softmax(f)_label.
LossGrad mlp_grad(const MlpModel& model, std::span<const double> x, double t,
                  const LossSpec& spec);

// Batch means of the same two losses.
LossGrad batch_squared_error(const MlpModel& model, const Matrix& x,
                             std::span<const double> t, const Matrix& targets);
LossGrad batch_cross_entropy(const MlpModel& model, const Matrix& x,
                             std::span<const double> t,
                             std::span<const std::size_t> labels);

Matrix softmax_rows(const Matrix& logits);

}  // namespace dfm
