// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// The graph adapter: a sigmoid gate over projected sentence embeddings mixes a
// masked-token hidden state with an MLP "influence" of each neighbour, and the
// frozen LM head turns every fused vector into a vocabulary distribution.
//
//   a_ij    = σ((z_i W_q) · (z_j W_k))
//   h̃_ikj   = a_ij ĥ_ik + (1 − a_ij) g(z_j)
//   ỹ_ikj   = softmax(W h̃_ikj + b)
//
// Training minimises the mean over sampled neighbours of −ln ỹ_ikj[y_ik]
// (the negative log of the geometric mean of the per-edge probabilities).

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gprompt/lm_head.hpp"
#include "gprompt/numerics.hpp"
#include "gprompt/tag.hpp"

namespace gprompt {

enum class Ablation { kFull, kNoGate, kNoGraph, kNoSsl };
enum class Pooling { kArithmetic, kGeometric };
enum class Activation { kRelu };
enum class Precision { kFloat64, kFloat32 };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view s);
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct AdapterConfig {
  std::size_t gate_dim = 256;   // width of the W_q / W_k projections
  std::size_t mlp_depth = 2;    // number of dense layers in g
  std::size_t mlp_hidden = 64;  // hidden width of g (unused when depth is 1)
  Activation activation = Activation::kRelu;
  Ablation ablation = Ablation::kFull;

  /// Sizes used for the large-vocabulary datasets (hidden 3840).
  static AdapterConfig large_scale();
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_pairs = 10'000;
  std::size_t sample_k = 4;
  double mask_ratio = 0.10;  // consumed by extraction; recorded for provenance
  double lr = 1e-3;
  double weight_decay = 0.01;
  double warmup_fraction = 0.10;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat64;
  bool self_loops = true;
  std::size_t threads = 1;  // 0 = worker_count()

  /// lr 1e-6, 10,000-pair batches, four sampled neighbours.
  static TrainConfig large_scale();
  void validate() const;
};

struct DenseLayer {
  Matrix weight;  // in × out
  Matrix bias;    // 1 × out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Θ = {W_q, W_k, Θ_g}.
struct AdapterParams {
  Matrix query;  // d_z × d_a
  Matrix key;    // d_z × d_a
  std::vector<DenseLayer> mlp;

  std::size_t embedding_dim() const { return query.rows(); }
  std::size_t gate_dim() const { return query.cols(); }
  std::size_t hidden_dim() const { return mlp.empty() ? 0 : mlp.back().weight.cols(); }

  /// Flattened in declaration order: W_q, W_k, then weight/bias per layer.
  std::vector<Matrix> tensors() const;
  /// Inverse of tensors(); shapes are taken from `*this`.
  AdapterParams with_tensors(std::span<const Matrix> tensors) const;
  AdapterParams zeros_like() const;

  friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

/// Xavier-uniform W_q, W_k and hidden MLP layers; the MLP output layer and
/// its bias start at zero so g ≡ 0 at initialisation.
AdapterParams init_adapter(const AdapterConfig& cfg, std::size_t embedding_dim,
                           std::size_t hidden_dim, std::mt19937_64& rng);

/// Forward intermediates for one (token, neighbour) edge.
struct EdgeForward {
  Vector q, k;                  // z_i W_q, z_j W_k
  double gate = 0.5;
  std::vector<Vector> pre;      // MLP pre-activations per layer
  std::vector<Vector> post;     // MLP outputs per layer (post[L-1] = g)
  Vector fused;                 // h̃
  Vector probs;                 // ỹ
};

class GraphAdapter {
 public:
  GraphAdapter(AdapterParams params, AdapterConfig cfg);

  const AdapterParams& params() const { return params_; }
  const AdapterConfig& config() const { return cfg_; }

  double gate(std::span<const double> z_i, std::span<const double> z_j) const;
  Vector influence(std::span<const double> z_j) const;
  Vector fuse(std::span<const double> hidden, std::span<const double> z_i,
              std::span<const double> z_j) const;
  Vector edge_predict(const LmHead& head, std::span<const double> hidden,
                      std::span<const double> z_i, std::span<const double> z_j) const;

  /// Pools edge distributions over `neighbors` (rows of `embeddings`).
  /// Arithmetic: elementwise mean. Geometric: elementwise geometric mean,
  /// renormalised. Throws EmptyNeighborhood on an empty list.
  Vector node_predict(const LmHead& head, std::span<const double> hidden,
                      std::span<const double> z_i, const Matrix& embeddings,
                      std::span<const NodeId> neighbors,
                      Pooling pooling = Pooling::kArithmetic) const;

  EdgeForward forward(const LmHead& head, std::span<const double> hidden,
                      std::span<const double> z_i, std::span<const double> z_j) const;

 private:
  void check_embedding(std::span<const double> z) const;

  AdapterParams params_;
  AdapterConfig cfg_;
};

/// Mean over `neighbors` of −ln ỹ_ikj[token] (log floored at kLogFloor).
double loss_geometric(const GraphAdapter& adapter, const LmHead& head,
                      std::span<const double> hidden, TokenId token,
                      std::span<const double> z_i, const Matrix& embeddings,
                      std::span<const NodeId> neighbors);

/// Masked-token records in 64-bit form, ready for repeated forward passes.
struct TrainingSet {
  Matrix embeddings;              // N × d_z
  std::vector<Vector> hidden;     // per record
  std::vector<TokenId> tokens;    // per record
  std::vector<NodeId> nodes;      // per record

  static TrainingSet from_bundle(const Bundle& bundle);
  /// Subset of the bundle's masked records (by index).
  static TrainingSet from_bundle(const Bundle& bundle, std::span<const std::size_t> records);
  std::size_t size() const { return tokens.size(); }
};

/// One (masked record, neighbour) training pair. `weight` is 1/|J| for a
/// record with |J| sampled neighbours, so each record counts once.
struct PairSample {
  std::size_t record = 0;
  NodeId neighbor = 0;
  double weight = 1.0;
};

struct LossAndGrads {
  double loss = 0.0;          // Σ w·CE / Σ w
  double weight_sum = 0.0;    // Σ w
  AdapterParams grads;        // ∂loss/∂Θ
};

/// Analytic backward pass through softmax-CE, the frozen head, the convex
/// fuse, the gate (both projections) and the MLP. Pairs are processed in
/// fixed chunks reduced in order, so the result is independent of `threads`.
LossAndGrads loss_and_grads(const GraphAdapter& adapter, const LmHead& head,
                            const TrainingSet& data, std::span<const PairSample> batch,
                            std::size_t threads = 1);

/// Finite-difference check of loss_and_grads at the adapter's current
/// parameters over `batch`.
GradCheckReport check_gradients(const GraphAdapter& adapter, const LmHead& head,
                                const TrainingSet& data, std::span<const PairSample> batch,
                                double eps = 1e-5, std::size_t max_per_tensor = 0,
                                std::uint64_t seed = 0);

struct GradCheckOptions {
  std::size_t records = 4;     // first masked records of the bundle
  std::size_t sample_k = 4;
  double perturb = 0.1;        // N(0, perturb) added to every initial weight
  double eps = 1e-5;
  std::size_t max_per_tensor = 0;
  bool self_loops = true;
  std::uint64_t seed = 0;
};

/// Gradient check on a bundle: initialises an adapter from `seed`, perturbs
/// it so the influence MLP is active, samples neighbours for the first
/// records, and runs check_gradients over the resulting pairs.
GradCheckReport check_bundle_gradients(const Bundle& bundle, const AdapterConfig& cfg,
                                       const GradCheckOptions& opts);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::uint64_t steps = 0;
  double seconds = 0.0;
};

struct TrainResult {
  GraphAdapter adapter;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Training graph for a configuration: the bundle graph, with self-loops when
/// requested, or only self-loops under the no_graph ablation.
Graph training_graph(const Bundle& bundle, const AdapterConfig& adapter_cfg,
                     bool self_loops);

/// Each epoch samples `sample_k` neighbours for every masked record (in
/// record order), packs the pairs into batches of `batch_pairs`, and takes one
/// AdamW step per batch. no_ssl returns the initialisation untouched.
TrainResult train(const Bundle& bundle, const AdapterConfig& adapter_cfg,
                  const TrainConfig& train_cfg, const EpochCallback& on_epoch = {});

/// Same as above, restricted to a subset of masked records.
TrainResult train(const Bundle& bundle, std::span<const std::size_t> records,
                  const AdapterConfig& adapter_cfg, const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch = {});

// GPA1 adapter file.
inline constexpr std::uint32_t kAdapterVersion = 1;

struct AdapterFile {
  AdapterParams params;
  std::size_t mlp_depth = 0;
  std::size_t mlp_hidden = 0;
};

std::vector<std::byte> serialize_adapter(const AdapterParams& params, std::size_t mlp_hidden);
AdapterFile deserialize_adapter(std::span<const std::byte> bytes);
void save_adapter(const AdapterParams& params, std::size_t mlp_hidden,
                  const std::filesystem::path& path);
AdapterFile load_adapter(const std::filesystem::path& path);

}  // namespace gprompt
