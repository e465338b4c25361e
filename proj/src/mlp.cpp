// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/mlp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dfm {

const char* to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "silu";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  throw ArgumentError("unknown activation '" + name + "'");
}

std::vector<std::size_t> MlpShape::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(input_dim + time_features);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

std::size_t MlpShape::param_count() const {
  const auto dims = layer_dims();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += (dims[l] + 1) * dims[l + 1];
  return n;
}

std::size_t MlpShape::forward_flops() const {
  const auto dims = layer_dims();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += (2 * dims[l] + 1) * dims[l + 1];
  return n;
}

void MlpShape::validate() const {
  if (time_features % 2 != 0) throw ArgumentError("time_features must be even");
  for (std::size_t d : layer_dims()) {
    if (d == 0) throw ArgumentError("MLP layer dimensions must be positive");
  }
}

MlpModel::MlpModel(MlpShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  const auto dims = shape_.layer_dims();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    offsets_.push_back(offset);
    offset += (dims[l] + 1) * dims[l + 1];
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

MlpModel MlpModel::initialized(MlpShape shape, Rng& rng) {
  MlpModel m(std::move(shape));
  const auto dims = m.shape_.layer_dims();
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    const std::size_t n_w = dims[l] * dims[l + 1];
    for (std::size_t i = 0; i < n_w; ++i) {
      m.params_[static_cast<Eigen::Index>(m.offsets_[l] + i)] = rng.uniform(-limit, limit);
    }
  }
  return m;
}

void MlpModel::set_params(const Vector& p) {
  if (p.size() != params_.size()) throw ShapeError("set_params: parameter count mismatch");
  params_ = p;
}

Eigen::Map<const Matrix> MlpModel::weight(std::size_t layer) const {
  const auto dims = shape_.layer_dims();
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(dims[layer + 1]),
          static_cast<Eigen::Index>(dims[layer])};
}

Eigen::Map<const Vector> MlpModel::bias(std::size_t layer) const {
  const auto dims = shape_.layer_dims();
  return {params_.data() + offsets_[layer] + dims[layer] * dims[layer + 1],
          static_cast<Eigen::Index>(dims[layer + 1])};
}

Matrix time_embedding(std::span<const double> t, std::size_t count) {
  Matrix out(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t k = 1; k <= count / 2; ++k) {
      const double arg = std::numbers::pi * static_cast<double>(k) * t[i];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * (k - 1))) = std::sin(arg);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * (k - 1) + 1)) =
          std::cos(arg);
    }
  }
  return out;
}

namespace {

void activate(Activation act, const Matrix& pre, Matrix& out) {
  if (act == Activation::kTanh) {
    // 1 - 2 / (exp(2z) + 1) uses Eigen's vectorized exp; saturates cleanly at +-1.
    out = (1.0 - 2.0 / ((2.0 * pre.array()).exp() + 1.0)).matrix();
  } else {
    out = (pre.array() / (1.0 + (-pre.array()).exp())).matrix();
  }
}

// d act / d pre, given the pre-activation and the activation output.
Matrix activation_grad(Activation act, const Matrix& pre, const Matrix& post) {
  if (act == Activation::kTanh) return (1.0 - post.array().square()).matrix();
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-pre.array()).exp());
  return (s * (1.0 + pre.array() * (1.0 - s))).matrix();
}

}  // namespace

Matrix mlp_forward(const MlpModel& model, const Matrix& x, std::span<const double> t,
                   ForwardCache* cache) {
  const MlpShape& shape = model.shape();
  if (static_cast<std::size_t>(x.cols()) != shape.input_dim) {
    std::ostringstream os;
    os << "mlp_forward: input has " << x.cols() << " columns, model expects "
       << shape.input_dim;
    throw ShapeError(os.str());
  }
  if (t.size() != static_cast<std::size_t>(x.rows())) {
    throw ShapeError("mlp_forward: one time value per row required");
  }
  Matrix h(x.rows(), static_cast<Eigen::Index>(shape.input_dim + shape.time_features));
  h.leftCols(x.cols()) = x;
  if (shape.time_features > 0) {
    h.rightCols(static_cast<Eigen::Index>(shape.time_features)) =
        time_embedding(t, shape.time_features);
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const std::size_t n_layers = model.num_layers();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix z = h * model.weight(l).transpose();
    z.rowwise() += model.bias(l).transpose();
    if (cache) cache->inputs.push_back(h);
    if (l + 1 == n_layers) return z;
    activate(shape.activation, z, h);
    if (cache) cache->pre.push_back(std::move(z));
  }
  return h;  // unreachable: a model always has at least one layer
}

Vector mlp_forward(const MlpModel& model, std::span<const double> x, double t) {
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  const double tt[1] = {t};
  return mlp_forward(model, row, tt).row(0).transpose();
}

void mlp_backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_out,
                  Vector& grad) {
  if (grad.size() != model.params().size()) {
    throw ShapeError("mlp_backward: gradient buffer has wrong size");
  }
  const auto dims = model.shape().layer_dims();
  std::size_t offset = model.param_count();
  Matrix delta = d_out;
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    offset -= static_cast<std::size_t>((in + 1) * out);
    Eigen::Map<Matrix> d_w(grad.data() + offset, out, in);
    Eigen::Map<Vector> d_b(grad.data() + offset + in * out, out);
    d_w.noalias() += delta.transpose() * cache.inputs[l];
    d_b += delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix d_h = delta * model.weight(l);
    delta = d_h.cwiseProduct(
        activation_grad(model.shape().activation, cache.pre[l - 1], cache.inputs[l]));
  }
}

LossSpec LossSpec::squared_error(Vector target) {
  LossSpec s;
  s.kind = LossKind::kSquaredError;
  s.target = std::move(target);
  return s;
}

LossSpec LossSpec::cross_entropy(std::size_t label) {
  LossSpec s;
  s.kind = LossKind::kCrossEntropy;
  s.label = label;
  return s;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

LossGrad batch_squared_error(const MlpModel& model, const Matrix& x,
                             std::span<const double> t, const Matrix& targets) {
  ForwardCache cache;
  const Matrix out = mlp_forward(model, x, t, &cache);
  require_same_shape(out.rows(), out.cols(), targets.rows(), targets.cols(),
                     "squared-error target");
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  const Matrix diff = out - targets;
  LossGrad r;
  r.loss = diff.squaredNorm() * inv_b;
  r.grad = Vector::Zero(model.params().size());
  mlp_backward(model, cache, (2.0 * inv_b) * diff, r.grad);
  return r;
}

LossGrad batch_cross_entropy(const MlpModel& model, const Matrix& x,
                             std::span<const double> t,
                             std::span<const std::size_t> labels) {
  if (labels.size() != static_cast<std::size_t>(x.rows())) {
    throw ShapeError("cross-entropy: one label per row required");
  }
  ForwardCache cache;
  const Matrix logits = mlp_forward(model, x, t, &cache);
  const auto k = static_cast<std::size_t>(logits.cols());
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  Matrix d = softmax_rows(logits);
  LossGrad r;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const std::size_t label = labels[static_cast<std::size_t>(i)];
    if (label >= k) throw ArgumentError("cross-entropy: label out of range");
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    r.loss += (lse - logits(i, static_cast<Eigen::Index>(label))) * inv_b;
    d(i, static_cast<Eigen::Index>(label)) -= 1.0;
  }
  d *= inv_b;
  r.grad = Vector::Zero(model.params().size());
  mlp_backward(model, cache, d, r.grad);
  return r;
}

LossGrad mlp_grad(const MlpModel& model, std::span<const double> x, double t,
                  const LossSpec& spec) {
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  const double tt[1] = {t};
  switch (spec.kind) {
    case LossKind::kSquaredError:
      return batch_squared_error(model, row, tt, spec.target.transpose());
    case LossKind::kCrossEntropy: {
      const std::size_t labels[1] = {spec.label};
      return batch_cross_entropy(model, row, tt, labels);
    }
  }
  throw ArgumentError("mlp_grad: unknown loss specification");
}

}  // namespace dfm
