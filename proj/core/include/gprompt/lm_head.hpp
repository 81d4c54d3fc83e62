// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "gprompt/numerics.hpp"
#include "gprompt/tag.hpp"

namespace gprompt {

/// The frozen masked-LM prediction layer: softmax(W·h + b). Nothing in the
/// library writes to it after construction.
class LmHead {
 public:
  LmHead(Matrix weight, Vector bias);
  static LmHead from_bundle(const Bundle& bundle);

  std::size_t vocab_size() const { return weight_.rows(); }
  std::size_t hidden_dim() const { return weight_.cols(); }
  const Matrix& weight() const { return weight_; }
  const Vector& bias() const { return bias_; }

  Vector logits(std::span<const double> h) const;
  Vector predict(std::span<const double> h) const;

  /// Wᵀ·r, the pull-back of a logit-space gradient into hidden space.
  Vector backward(std::span<const double> dlogits) const;

  std::uint64_t checksum() const;

 private:
  Matrix weight_;
  Vector bias_;
};

}  // namespace gprompt
