// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <vector>

namespace dfm {

EnsemblePolicy EnsemblePolicy::full() { return {}; }

EnsemblePolicy EnsemblePolicy::top_k(std::size_t k) {
  EnsemblePolicy p;
  p.strategy = Strategy::kTopK;
  p.k = k;
  return p;
}

EnsemblePolicy EnsemblePolicy::sample(std::size_t n_active, double temperature) {
  EnsemblePolicy p;
  p.strategy = Strategy::kSample;
  p.n_active = n_active;
  p.temperature = temperature;
  return p;
}

EnsemblePolicy EnsemblePolicy::nucleus(double top_p, double temperature) {
  EnsemblePolicy p;
  p.strategy = Strategy::kNucleus;
  p.p = top_p;
  p.temperature = temperature;
  return p;
}

EnsemblePolicy EnsemblePolicy::threshold(double tau) {
  EnsemblePolicy p;
  p.strategy = Strategy::kThreshold;
  p.tau = tau;
  return p;
}

EnsemblePolicy EnsemblePolicy::oracle(std::size_t label) {
  EnsemblePolicy p;
  p.strategy = Strategy::kOracleLabel;
  p.label = label;
  return p;
}

EnsemblePolicy EnsemblePolicy::monolith() {
  EnsemblePolicy p;
  p.strategy = Strategy::kMonolithBypass;
  return p;
}

std::string EnsemblePolicy::name() const {
  std::ostringstream os;
  switch (strategy) {
    case Strategy::kFull: return "full";
    case Strategy::kTopK: os << "top-" << k; break;
    case Strategy::kSample: os << "sample-" << n_active; break;
    case Strategy::kNucleus: os << "nucleus-p" << p << "-T" << temperature; break;
    case Strategy::kThreshold: os << "threshold-" << tau; break;
    case Strategy::kOracleLabel: return "oracle";
    case Strategy::kMonolithBypass: return "monolith";
  }
  if (strategy == Strategy::kSample && temperature != 1.0) os << "-T" << temperature;
  return os.str();
}

void EnsemblePolicy::validate(std::size_t num_experts) const {
  auto fail = [](const std::string& what) { throw ArgumentError("policy: " + what); };
  switch (strategy) {
    case Strategy::kTopK:
      if (k == 0 || k > num_experts) fail("top-k needs 1 <= k <= K");
      break;
    case Strategy::kSample:
      if (n_active == 0 || n_active > num_experts) fail("sample needs 1 <= n <= K");
      if (!(temperature > 0.0)) fail("temperature must be positive");
      break;
    case Strategy::kNucleus:
      if (!(p > 0.0 && p <= 1.0)) fail("nucleus p must lie in (0, 1]");
      if (!(temperature > 0.0)) fail("temperature must be positive");
      break;
    case Strategy::kThreshold:
      if (!(tau >= 0.0 && tau < 1.0)) fail("threshold tau must lie in [0, 1)");
      break;
    case Strategy::kOracleLabel:
      if (label >= num_experts) fail("oracle label out of range");
      break;
    case Strategy::kFull:
    case Strategy::kMonolithBypass:
      break;
  }
}

EnsemblePolicy policy_from_name(const std::string& name) {
  const auto bad = [&]() { return UsageError("unknown strategy '" + name + "'"); };
  const auto count = [&](const std::string& s) -> std::size_t {
    if (s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit)) throw bad();
    return std::stoul(s);
  };
  const auto real = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw bad();
    return v;
  };
  // Splits "<head>-T<temperature>" when the suffix is present.
  const auto temperature = [&](std::string& s) {
    const auto pos = s.find("-T");
    if (pos == std::string::npos) return 1.0;
    const double t = real(s.substr(pos + 2));
    s.resize(pos);
    return t;
  };
  if (name == "full") return EnsemblePolicy::full();
  if (name == "monolith") return EnsemblePolicy::monolith();
  if (name == "oracle") return EnsemblePolicy::oracle();
  if (name == "nucleus") return EnsemblePolicy::nucleus(0.9);
  if (name == "threshold") return EnsemblePolicy::threshold(0.05);
  if (name == "sample") return EnsemblePolicy::sample(1);
  if (name.rfind("top-", 0) == 0) return EnsemblePolicy::top_k(count(name.substr(4)));
  if (name.rfind("sample-", 0) == 0) {
    std::string rest = name.substr(7);
    const double t = temperature(rest);
    return EnsemblePolicy::sample(count(rest), t);
  }
  if (name.rfind("threshold-", 0) == 0) return EnsemblePolicy::threshold(real(name.substr(10)));
  if (name.rfind("nucleus-p", 0) == 0) {
    std::string rest = name.substr(9);
    const double t = temperature(rest);
    return EnsemblePolicy::nucleus(real(rest), t);
  }
  throw bad();
}

namespace {

void check_simplex(const Vector& probs) {
  if (probs.size() == 0) throw ArgumentError("select_experts: empty probability vector");
  for (double v : probs) {
    if (!std::isfinite(v) || v < -1e-9) {
      throw ArgumentError("select_experts: probabilities must be finite and nonnegative");
    }
  }
  if (std::abs(probs.sum() - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "select_experts: probabilities sum to " << probs.sum() << ", not 1";
    throw ArgumentError(os.str());
  }
}

// Indices sorted by probability, descending; equal values keep index order.
std::vector<std::size_t> ranked(const Vector& probs) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(probs.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return probs[static_cast<Eigen::Index>(a)] > probs[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

// softmax(log p / T), with zero-probability experts kept at zero.
Vector tempered(const Vector& probs, double temperature) {
  Vector out(probs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) mx = std::max(mx, std::log(probs[i]) / temperature);
  }
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] > 0.0 ? std::exp(std::log(probs[i]) / temperature - mx) : 0.0;
  }
  return out / out.sum();
}

std::size_t draw_categorical(const Vector& w, Rng& rng) {
  const double total = w.sum();
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last = static_cast<std::size_t>(i);
    if (u < w[i]) return last;
    u -= w[i];
  }
  return last;
}

Vector keep_renormalized(const Vector& probs, const std::vector<std::size_t>& keep) {
  Vector out = Vector::Zero(probs.size());
  double total = 0.0;
  for (std::size_t i : keep) total += probs[static_cast<Eigen::Index>(i)];
  if (total > 0.0) {
    for (std::size_t i : keep) {
      out[static_cast<Eigen::Index>(i)] = probs[static_cast<Eigen::Index>(i)] / total;
    }
  } else {
    // Every kept expert has zero mass; fall back to equal weights.
    for (std::size_t i : keep) out[static_cast<Eigen::Index>(i)] = 1.0 / keep.size();
  }
  return out;
}

}  // namespace

Vector select_experts(const Vector& probs, const EnsemblePolicy& policy, Rng& rng) {
  check_simplex(probs);
  const auto k_total = static_cast<std::size_t>(probs.size());
  policy.validate(k_total);
  switch (policy.strategy) {
    case Strategy::kFull:
      return probs;
    case Strategy::kTopK: {
      std::vector<std::size_t> order = ranked(probs);
      order.resize(policy.k);
      return keep_renormalized(probs, order);
    }
    case Strategy::kSample: {
      Vector w = tempered(probs, policy.temperature);
      Vector out = Vector::Zero(probs.size());
      const std::size_t available =
          static_cast<std::size_t>((w.array() > 0.0).count());
      const std::size_t n = std::min(policy.n_active, available);
      for (std::size_t draw = 0; draw < n; ++draw) {
        const std::size_t pick = draw_categorical(w, rng);
        out[static_cast<Eigen::Index>(pick)] = 1.0 / static_cast<double>(n);
        w[static_cast<Eigen::Index>(pick)] = 0.0;
      }
      return out;
    }
    case Strategy::kNucleus: {
      const Vector w = tempered(probs, policy.temperature);
      const std::vector<std::size_t> order = ranked(w);
      Vector prefix = Vector::Zero(w.size());
      double cumulative = 0.0;
      for (std::size_t i : order) {
        prefix[static_cast<Eigen::Index>(i)] = w[static_cast<Eigen::Index>(i)];
        cumulative += w[static_cast<Eigen::Index>(i)];
        if (cumulative >= policy.p) break;
      }
      Vector out = Vector::Zero(probs.size());
      out[static_cast<Eigen::Index>(draw_categorical(prefix, rng))] = 1.0;
      return out;
    }
    case Strategy::kThreshold: {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < k_total; ++i) {
        if (probs[static_cast<Eigen::Index>(i)] >= policy.tau) keep.push_back(i);
      }
      if (keep.empty()) keep.push_back(ranked(probs).front());
      return keep_renormalized(probs, keep);
    }
    case Strategy::kOracleLabel: {
      Vector out = Vector::Zero(probs.size());
      out[static_cast<Eigen::Index>(policy.label)] = 1.0;
      return out;
    }
    case Strategy::kMonolithBypass:
      break;
  }
  throw ArgumentError("select_experts: the monolith strategy selects no experts");
}

}  // namespace dfm
