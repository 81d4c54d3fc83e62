// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// Synthetic text-attributed graphs with a known answer. Nodes carry a latent
// topic; edges follow a stochastic block model; masked-token hidden states
// carry only a λ-weighted hint of the node's topic, while sentence embeddings
// carry a noisy topic code. Neighbour embeddings therefore disambiguate masked
// tokens, and the Bayes oracle below bounds what any predictor can achieve.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gprompt/numerics.hpp"
#include "gprompt/tag.hpp"

namespace gprompt {

struct SynthConfig {
  std::size_t num_nodes = 500;
  std::size_t num_topics = 4;
  std::size_t vocab_size = 100;
  std::size_t tokens_per_topic = 20;
  std::size_t common_tokens = 20;
  double p_in = 0.05;
  double p_out = 0.002;
  double context_weight = 0.2;   // λ: how much of the topic the context reveals
  double topic_signal = 1.0;     // ρ: topic-code strength in sentence embeddings
  double embedding_noise = 1.0;  // σ_z
  double hidden_noise = 0.05;    // σ_h
  double head_scale = 5.0;       // s: LM head rows are s·e(t)
  double hidden_scale = 4.0;     // s': scale of the context mean in ĥ
  std::size_t masks_per_node = 3;
  std::size_t prompts_per_node = 1;
  std::size_t hidden_dim = 128;
  std::size_t embedding_dim = 32;
  std::uint64_t seed = 0;

  /// Twelve nodes, two topics, eight tokens, d = 6, d_z = 4: small enough
  /// for exhaustive finite-difference checks.
  static SynthConfig tiny(std::uint64_t seed = 0);
  void validate() const;
};

struct SynthTruth {
  std::vector<int> topics;      // per node
  Matrix token_embeddings;      // T × d, unit rows
  Matrix topic_means;           // C × d, μ_c
  Matrix topic_codes;           // C × d_z, orthonormal u_c
  Vector context_mean;          // μ̄
  SynthConfig config;

  /// Topic of a vocabulary id, or -1 for common tokens.
  int token_topic(TokenId t) const;
  /// Vocabulary ids [c·tpt, (c+1)·tpt).
  std::vector<TokenId> topic_tokens(int topic) const;
  /// ĥ's noiseless mean for a node of topic c: s'·(λ μ_c + (1−λ) μ̄).
  Vector context_center(int topic) const;
};

struct SynthResult {
  Bundle bundle;
  SynthTruth truth;
};

/// Deterministic for a fixed config (including seed).
SynthResult generate(const SynthConfig& cfg);

/// Posterior over topics of the record's node given ĥ (Gaussian likelihood
/// around each context centre) and the block-model likelihood of its
/// adjacency row, with neighbour topics observed. Enumerates all C topics.
Vector bayes_topic_posterior(const SynthTruth& truth, const MaskedTokenRecord& record,
                             std::span<const int> neighbor_topics);

/// Token posterior: topic posterior spread uniformly over each topic's tokens.
Vector bayes_oracle(const SynthTruth& truth, const MaskedTokenRecord& record,
                    std::span<const int> neighbor_topics);

/// Topic of the arg-max token of `probs` (-1 when a common token wins).
int predicted_topic(const SynthTruth& truth, std::span<const double> probs);

}  // namespace gprompt
