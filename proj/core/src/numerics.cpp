// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gprompt {

Matrix widen(const MatrixF& m) {
  Matrix out(m.rows(), m.cols());
  std::copy(m.values().begin(), m.values().end(), out.values().begin());
  return out;
}

MatrixF narrow(const Matrix& m) {
  MatrixF out(m.rows(), m.cols());
  std::transform(m.values().begin(), m.values().end(), out.values().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

Vector vec_mat(std::span<const double> x, const Matrix& w) {
  require(x.size() == w.rows(), "vec_mat: dimension mismatch");
  Vector y(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const auto wr = w.row(r);
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += xr * wr[c];
  }
  return y;
}

Vector mat_vec(const Matrix& w, std::span<const double> x) {
  require(x.size() == w.cols(), "mat_vec: dimension mismatch");
  Vector y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x);
  return y;
}

Vector mat_t_vec(const Matrix& w, std::span<const double> x) {
  return vec_mat(x, w);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < orow.size(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: dimension mismatch");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cross_entropy(std::span<const double> p, std::size_t y, double floor) {
  if (y >= p.size()) throw InvalidArgument("cross_entropy: class index out of range");
  return -std::log(std::max(p[y], floor));
}

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = dist(rng);
  return w;
}

OptimizerState make_optimizer_state(std::span<const Matrix> params,
                                    const AdamWConfig& config) {
  OptimizerState s;
  s.config = config;
  for (const Matrix& p : params) {
    s.first_moment.emplace_back(p.rows(), p.cols());
    s.second_moment.emplace_back(p.rows(), p.cols());
  }
  return s;
}

double effective_lr(const AdamWConfig& config, std::uint64_t step) {
  if (config.warmup_steps == 0 || step >= config.warmup_steps) return config.lr;
  return config.lr * static_cast<double>(step + 1) /
         static_cast<double>(config.warmup_steps);
}

AdamWResult adamw_step(std::span<const Matrix> params,
                       std::span<const Matrix> grads,
                       const OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw InvalidArgument("adamw_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]) ||
        !params[i].same_shape(state.second_moment[i])) {
      throw InvalidArgument("adamw_step: shape mismatch in tensor " + std::to_string(i));
    }
  }

  const AdamWConfig& cfg = state.config;
  const double lr = effective_lr(cfg, state.step);
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;

  AdamWResult out{{params.begin(), params.end()}, state};
  out.state.step = state.step + 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = out.params[i].values();
    auto m = out.state.first_moment[i].values();
    auto v = out.state.second_moment[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] = p[k] * decay - lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  return out;
}

GradCheckReport finite_diff_check(const LossWithGrad& loss_fn,
                                  std::span<const Matrix> params, double eps,
                                  std::size_t max_per_tensor, std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidArgument("finite_diff_check: eps must be positive");
  std::vector<Matrix> analytic;
  for (const Matrix& p : params) analytic.emplace_back(p.rows(), p.cols());
  const double base = loss_fn(params, &analytic);
  if (!std::isfinite(base)) throw NumericalFailure("finite_diff_check: non-finite loss");
  if (analytic.size() != params.size()) {
    throw InvalidArgument("finite_diff_check: gradient count mismatch");
  }

  GradCheckReport report;
  std::mt19937_64 rng(seed);
  std::vector<Matrix> probe(params.begin(), params.end());
  for (std::size_t t = 0; t < probe.size(); ++t) {
    if (!analytic[t].same_shape(probe[t])) {
      throw InvalidArgument("finite_diff_check: gradient shape mismatch");
    }
    auto values = probe[t].values();
    std::vector<std::size_t> coords(values.size());
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
    if (max_per_tensor > 0 && coords.size() > max_per_tensor) {
      for (std::size_t k = 0; k < max_per_tensor; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, coords.size() - 1);
        std::swap(coords[k], coords[pick(rng)]);
      }
      coords.resize(max_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t k : coords) {
      const double orig = values[k];
      values[k] = orig + eps;
      const double up = loss_fn(probe, nullptr);
      values[k] = orig - eps;
      const double down = loss_fn(probe, nullptr);
      values[k] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalFailure("finite_diff_check: non-finite loss");
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t].values()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = t;
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gprompt
