// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/lm_head.hpp"

namespace gprompt {

LmHead::LmHead(Matrix weight, Vector bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (bias_.size() != weight_.rows()) {
    throw InvalidArgument("LmHead: bias length does not match vocabulary size");
  }
}

LmHead LmHead::from_bundle(const Bundle& bundle) {
  return LmHead(widen(bundle.head_weight),
                Vector(bundle.head_bias.begin(), bundle.head_bias.end()));
}

Vector LmHead::logits(std::span<const double> h) const {
  if (h.size() != hidden_dim()) throw InvalidArgument("LmHead::logits: hidden dim mismatch");
  Vector z = mat_vec(weight_, h);
  for (std::size_t t = 0; t < z.size(); ++t) z[t] += bias_[t];
  return z;
}

Vector LmHead::predict(std::span<const double> h) const { return softmax(logits(h)); }

Vector LmHead::backward(std::span<const double> dlogits) const {
  if (dlogits.size() != vocab_size()) {
    throw InvalidArgument("LmHead::backward: vocabulary dim mismatch");
  }
  return mat_t_vec(weight_, dlogits);
}

std::uint64_t LmHead::checksum() const {
  const std::uint64_t h = fnv1a(std::as_bytes(weight_.values()));
  return fnv1a(std::as_bytes(std::span<const double>(bias_)), h);
}

}  // namespace gprompt
