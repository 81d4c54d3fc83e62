// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// Cached text-attributed graph: topology, sentence embeddings, masked-token
// and prompt hidden states, and the frozen LM prediction layer, together with
// the GPB1 bundle file format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gprompt/numerics.hpp"

namespace gprompt {

using NodeId = std::uint64_t;
using TokenId = std::uint32_t;

/// Compressed sparse row adjacency. Rows are sorted and duplicate-free.
class Graph {
 public:
  Graph() = default;
  Graph(std::vector<std::uint64_t> offsets, std::vector<NodeId> targets,
        bool undirected, bool self_loops_added);

  /// Builds a CSR graph from an edge list. With `undirected` every edge is
  /// inserted in both directions. Duplicates are merged.
  static Graph from_edges(std::size_t num_nodes,
                          std::span<const std::pair<NodeId, NodeId>> edges,
                          bool undirected);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return targets_.size(); }
  bool undirected() const { return undirected_; }
  bool self_loops_added() const { return self_loops_added_; }

  /// CSR row of node i. Throws InvalidArgument when i is out of range.
  std::span<const NodeId> neighbors(NodeId i) const;
  std::size_t degree(NodeId i) const { return neighbors(i).size(); }

  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& targets() const { return targets_; }

  /// Throws ValidationError describing the first broken invariant.
  void validate() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::uint64_t> offsets_{0};
  std::vector<NodeId> targets_;
  bool undirected_ = true;
  bool self_loops_added_ = false;
};

/// Every node gains itself as a neighbour exactly once. Idempotent.
Graph add_self_loops(const Graph& g);

/// Graph on the same nodes whose only edges are the self-loops.
Graph self_loop_graph(std::size_t num_nodes);

/// Uniform sample without replacement of min(k, degree) neighbours of i.
/// Throws EmptyNeighborhood when i has no neighbours.
std::vector<NodeId> sample_neighbors(const Graph& g, NodeId i, std::size_t k,
                                     std::mt19937_64& rng);

struct MaskedTokenRecord {
  NodeId node = 0;
  std::uint32_t position = 0;
  TokenId token = 0;
  std::vector<float> hidden;

  friend bool operator==(const MaskedTokenRecord&, const MaskedTokenRecord&) = default;
};

struct PromptRecord {
  NodeId node = 0;
  std::uint32_t prompt_id = 0;
  std::vector<float> hidden;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct Bundle {
  Graph graph;
  MatrixF embeddings;   // N × d_z
  MatrixF head_weight;  // T × d
  std::vector<float> head_bias;  // T
  std::vector<MaskedTokenRecord> masked;
  std::vector<PromptRecord> prompts;
  std::optional<std::vector<std::string>> token_strings;

  std::size_t vocab_size() const { return head_weight.rows(); }
  std::size_t hidden_dim() const { return head_weight.cols(); }
  std::size_t embedding_dim() const { return embeddings.cols(); }
  std::size_t num_nodes() const { return graph.num_nodes(); }

  /// Throws ValidationError on any inconsistency between fields.
  void validate() const;

  /// Vocabulary id for a token string; nullopt when absent or when the bundle
  /// carries no token strings.
  std::optional<TokenId> find_token(std::string_view text) const;

  friend bool operator==(const Bundle&, const Bundle&) = default;
};

inline constexpr std::uint32_t kBundleVersion = 1;

std::vector<std::byte> serialize_bundle(const Bundle& bundle);
/// Parses and validates. FormatError for bad magic/version/trailing bytes,
/// IoError for truncation, ValidationError for inconsistent contents.
Bundle deserialize_bundle(std::span<const std::byte> bytes);

void save_bundle(const Bundle& bundle, const std::filesystem::path& path);
Bundle load_bundle(const std::filesystem::path& path);

/// Whole-file helpers shared by the binary formats.
std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace gprompt
