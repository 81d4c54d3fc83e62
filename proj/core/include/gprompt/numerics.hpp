// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "gprompt/error.hpp"

namespace gprompt {

using Vector = std::vector<double>;

/// Dense row-major matrix. `Matrix` (64-bit) is used for all arithmetic;
/// `MatrixF` is the 32-bit storage form used by on-disk containers.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidArgument("matrix data length does not match rows*cols");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const BasicMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using MatrixF = BasicMatrix<float>;

Matrix widen(const MatrixF& m);
MatrixF narrow(const Matrix& m);

bool all_finite(std::span<const double> v);
bool all_finite(std::span<const float> v);

// ---------------------------------------------------------------------------
// Dense kernels. All check shapes and throw InvalidArgument on mismatch.

/// y = x · W for a row vector x (|x| = W.rows()).
Vector vec_mat(std::span<const double> x, const Matrix& w);
/// y = W · x for a column vector x (|x| = W.cols()).
Vector mat_vec(const Matrix& w, std::span<const double> x);
/// y = Wᵀ · x (|x| = W.rows()).
Vector mat_t_vec(const Matrix& w, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------
// Activations and losses.

inline constexpr double kLogFloor = 1e-12;

/// Numerically stable softmax (max-subtracted). Throws on empty input.
Vector softmax(std::span<const double> logits);
double sigmoid(double x);
/// −ln max(p[y], floor).
double cross_entropy(std::span<const double> p, std::size_t y,
                     double floor = kLogFloor);

/// Xavier/Glorot uniform: U(−a, a) with a = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// AdamW with linear warmup.

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t warmup_steps = 0;
};

struct OptimizerState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Fresh state with zero moments shaped like `params`.
OptimizerState make_optimizer_state(std::span<const Matrix> params,
                                    const AdamWConfig& config);

/// Learning rate applied at `step` (0-based): lr·(step+1)/warmup during
/// warmup, lr afterwards.
double effective_lr(const AdamWConfig& config, std::uint64_t step);

struct AdamWResult {
  std::vector<Matrix> params;
  OptimizerState state;
};

/// One decoupled-weight-decay Adam update. Inputs are not modified.
AdamWResult adamw_step(std::span<const Matrix> params,
                       std::span<const Matrix> grads,
                       const OptimizerState& state);

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

/// Evaluates the loss at `params`; when `grads` is non-null it must also
/// write the analytic gradient (same shapes as params).
using LossWithGrad =
    std::function<double(std::span<const Matrix> params,
                         std::vector<Matrix>* grads)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Central differences per coordinate against the analytic gradient. The
/// relative error of a coordinate is |a − n| / max(|a|, |n|, 1e-8).
/// With `max_per_tensor` > 0, only that many coordinates per tensor are
/// probed (uniform without replacement, drawn from `seed`).
/// Throws NumericalFailure if any loss evaluation is non-finite.
GradCheckReport finite_diff_check(const LossWithGrad& loss_fn,
                                  std::span<const Matrix> params,
                                  double eps = 1e-5,
                                  std::size_t max_per_tensor = 0,
                                  std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Small statistics helpers.

double mean(std::span<const double> v);
/// Population standard deviation.
double stddev(std::span<const double> v);

/// Derives an independent seed for sub-stream `stream` (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a over raw bytes; used for frozen-weight checksums.
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace gprompt
