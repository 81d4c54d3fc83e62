// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// Measurement battery for prompt-derived node features: rank AUC, zero-shot
// vocabulary-set scoring, per-token interpretability ranking, and a few-shot
// harness (MLP or mean-aggregation message passing) run over random
// partitions and repeats.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gprompt/numerics.hpp"
#include "gprompt/tag.hpp"

namespace gprompt {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs in which the
/// positive scores higher, ties counting one half. Labels must be 0/1 with
/// both classes present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct VocabSet {
  std::string label;
  std::vector<TokenId> positive;
  std::vector<TokenId> negative;

  /// Nonempty, disjoint, every id < vocab_size.
  void validate(std::size_t vocab_size) const;
};

/// score_i = Σ_{t∈pos} Y[i,t] − Σ_{t∈neg} Y[i,t].
Vector zero_shot_scores(const Matrix& probs, const VocabSet& set);

/// Multi-class zero-shot: class of each node = argmax over sets of Σ_{t∈pos}.
std::vector<int> zero_shot_predict(const Matrix& probs, std::span<const VocabSet> sets);

struct TokenAuc {
  TokenId token = 0;
  double auc = 0.0;
};

/// Column-wise AUC, sorted descending (ties by lower id), first top_k kept.
/// `tokens` names the columns (defaults to 0..cols-1).
std::vector<TokenAuc> rank_tokens_by_auc(const Matrix& probs, std::span<const int> labels,
                                         std::size_t top_k,
                                         std::span<const TokenId> tokens = {});

enum class ClassifierKind { kMlp, kSage };
std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier(std::string_view s);

struct FewShotConfig {
  std::size_t shots_per_class = 10;
  std::size_t partitions = 5;
  std::size_t repeats = 5;
  double test_fraction = 0.6;
  ClassifierKind classifier = ClassifierKind::kMlp;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  double lr = 1e-2;
  double weight_decay = 0.01;
  std::size_t epochs = 200;
  bool standardize = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> test;
};

/// Draws the test set (test_fraction of all nodes), then exactly
/// `shots_per_class` training nodes per class from the remainder.
Split few_shot_split(std::span<const int> labels, const FewShotConfig& cfg,
                     std::uint64_t partition_seed);

/// Column z-scoring with statistics over all rows; constant columns become 0.
Matrix standardize_columns(const Matrix& x);

/// Trains the configured classifier on split.train and returns test accuracy
/// (more than two classes) or test AUC of the class-1 probability (binary).
/// The sage variant runs `layers` rounds of x_i ← mean_{j∈N_i} relu(W x_j + b)
/// over `graph` followed by a linear read-out.
double train_classifier(const Matrix& x, const Graph& graph, std::span<const int> labels,
                        const Split& split, const FewShotConfig& cfg, std::uint64_t seed);

struct MetricsReport {
  std::string metric;  // "accuracy" or "auc"
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population

  static MetricsReport from_values(std::string metric, std::vector<double> values);
};

/// partitions × repeats runs of train_classifier; repeats share a partition
/// and differ only in classifier initialisation.
MetricsReport run_protocol(const Matrix& x, const Graph& graph, std::span<const int> labels,
                           const FewShotConfig& cfg);

std::size_t num_classes(std::span<const int> labels);

}  // namespace gprompt
