// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gprompt/adapter.hpp"
#include "gprompt/lm_head.hpp"
#include "gprompt/numerics.hpp"
#include "gprompt/tag.hpp"

namespace gprompt {

/// Inference context: the adapter, the frozen head, 64-bit embeddings and
/// the neighbourhood graph used for pooling (full N_i, self-loops included by
/// default, only self-loops under no_graph).
struct InferenceContext {
  const GraphAdapter& adapter;
  const LmHead& head;
  const Matrix& embeddings;
  const Graph& graph;
};

/// Mean over j ∈ N_i of f_LM(a_ij ĥ_{i|p} + (1 − a_ij) g(z_j)).
Vector infer_prompt_distribution(const InferenceContext& ctx, const PromptRecord& record);

/// Looks up the (node, prompt_id) record; throws NotFound when missing.
const PromptRecord& find_prompt(const Bundle& bundle, NodeId node, std::uint32_t prompt_id);

/// N × T matrix Y_p whose row i is node i's pooled prompt distribution.
/// Throws NotFound listing every node without a record for `prompt_id`.
Matrix build_feature_matrix(const InferenceContext& ctx, const Bundle& bundle,
                            std::uint32_t prompt_id, std::size_t threads = 1);

struct FeatureMatrix {
  std::vector<TokenId> selected_tokens;
  Matrix values;  // N × M, columns in selection order
};

/// Keeps the M columns of largest population standard deviation, in
/// descending-std order, ties broken by lower vocabulary id.
FeatureMatrix filter_std(const Matrix& probs, std::size_t m);

/// Keeps the listed columns in the given order. Rejects empty, duplicate or
/// out-of-range ids.
FeatureMatrix filter_vocab(const Matrix& probs, std::span<const TokenId> tokens);

/// Resolves each entry as a token string of the bundle, falling back to a
/// decimal id. Throws InvalidArgument for anything unresolvable.
std::vector<TokenId> resolve_tokens(const Bundle* bundle, std::span<const std::string> entries,
                                    std::size_t vocab_size);

// GPF1 feature file and its CSV sibling.
std::vector<std::byte> serialize_features(const FeatureMatrix& features);
FeatureMatrix deserialize_features(std::span<const std::byte> bytes);
void save_features(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);

/// node_id header followed by one column per token, headed by the token
/// string when available, else by its id. Values are the f32 payload in
/// shortest round-trip form.
std::string features_csv(const FeatureMatrix& features,
                         const std::optional<std::vector<std::string>>& token_strings);

}  // namespace gprompt
