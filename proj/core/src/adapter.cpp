// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "gprompt/parallel.hpp"

namespace gprompt {

namespace {

constexpr std::string_view kAdapterMagic = "GPA1";
constexpr std::size_t kPairChunk = 64;

void add_outer(Matrix& dst, std::span<const double> left, std::span<const double> right,
               double scale) {
  for (std::size_t r = 0; r < left.size(); ++r) {
    const double lr = left[r] * scale;
    if (lr == 0.0) continue;
    auto row = dst.row(r);
    for (std::size_t c = 0; c < right.size(); ++c) row[c] += lr * right[c];
  }
}

void add_into(AdapterParams& acc, const AdapterParams& other) {
  auto add = [](Matrix& a, const Matrix& b) {
    auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) av[k] += bv[k];
  };
  add(acc.query, other.query);
  add(acc.key, other.key);
  for (std::size_t l = 0; l < acc.mlp.size(); ++l) {
    add(acc.mlp[l].weight, other.mlp[l].weight);
    add(acc.mlp[l].bias, other.mlp[l].bias);
  }
}

void scale_all(AdapterParams& p, double s) {
  for (Matrix* m : {&p.query, &p.key}) {
    for (double& v : m->values()) v *= s;
  }
  for (auto& layer : p.mlp) {
    for (double& v : layer.weight.values()) v *= s;
    for (double& v : layer.bias.values()) v *= s;
  }
}

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoGate: return "no_gate";
    case Ablation::kNoGraph: return "no_graph";
    case Ablation::kNoSsl: return "no_ssl";
  }
  return "full";
}

Ablation parse_ablation(std::string_view s) {
  if (s == "full") return Ablation::kFull;
  if (s == "no_gate") return Ablation::kNoGate;
  if (s == "no_graph") return Ablation::kNoGraph;
  if (s == "no_ssl") return Ablation::kNoSsl;
  throw InvalidArgument("unknown ablation '" + std::string(s) + "'");
}

std::string_view to_string(Pooling p) {
  return p == Pooling::kArithmetic ? "arithmetic" : "geometric";
}

Pooling parse_pooling(std::string_view s) {
  if (s == "arithmetic") return Pooling::kArithmetic;
  if (s == "geometric") return Pooling::kGeometric;
  throw InvalidArgument("unknown pooling '" + std::string(s) + "'");
}

std::string_view to_string(Precision p) {
  return p == Precision::kFloat64 ? "f64" : "f32";
}

Precision parse_precision(std::string_view s) {
  if (s == "f64") return Precision::kFloat64;
  if (s == "f32") return Precision::kFloat32;
  throw InvalidArgument("unknown precision '" + std::string(s) + "'");
}

AdapterConfig AdapterConfig::large_scale() {
  AdapterConfig c;
  c.gate_dim = 256;
  c.mlp_depth = 2;
  c.mlp_hidden = 3840;
  return c;
}

TrainConfig TrainConfig::large_scale() {
  TrainConfig c;
  c.epochs = 100;
  c.batch_pairs = 10'000;
  c.sample_k = 4;
  c.lr = 1e-6;
  c.weight_decay = 0.01;
  return c;
}

void TrainConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw InvalidArgument("train: mask_ratio must lie in (0, 1)");
  }
  if (batch_pairs == 0) throw InvalidArgument("train: batch_pairs must be >= 1");
  if (sample_k == 0) throw InvalidArgument("train: sample_k must be >= 1");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) {
    throw InvalidArgument("train: lr and weight_decay must be non-negative");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw InvalidArgument("train: warmup_fraction must lie in [0, 1]");
  }
}

std::vector<Matrix> AdapterParams::tensors() const {
  std::vector<Matrix> out{query, key};
  for (const auto& layer : mlp) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

AdapterParams AdapterParams::with_tensors(std::span<const Matrix> t) const {
  if (t.size() != 2 + 2 * mlp.size()) {
    throw InvalidArgument("with_tensors: expected " + std::to_string(2 + 2 * mlp.size()) +
                          " tensors");
  }
  AdapterParams out = *this;
  std::size_t i = 0;
  auto take = [&](Matrix& dst) {
    if (!dst.same_shape(t[i])) throw InvalidArgument("with_tensors: shape mismatch");
    dst = t[i++];
  };
  take(out.query);
  take(out.key);
  for (auto& layer : out.mlp) {
    take(layer.weight);
    take(layer.bias);
  }
  return out;
}

AdapterParams AdapterParams::zeros_like() const {
  AdapterParams z;
  z.query = Matrix(query.rows(), query.cols());
  z.key = Matrix(key.rows(), key.cols());
  for (const auto& layer : mlp) {
    z.mlp.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                     Matrix(layer.bias.rows(), layer.bias.cols())});
  }
  return z;
}

AdapterParams init_adapter(const AdapterConfig& cfg, std::size_t embedding_dim,
                           std::size_t hidden_dim, std::mt19937_64& rng) {
  if (cfg.gate_dim == 0) throw InvalidArgument("adapter: gate_dim must be > 0");
  if (cfg.mlp_depth == 0) throw InvalidArgument("adapter: mlp_depth must be >= 1");
  if (cfg.mlp_depth > 1 && cfg.mlp_hidden == 0) {
    throw InvalidArgument("adapter: mlp_hidden must be > 0");
  }
  if (embedding_dim == 0 || hidden_dim == 0) {
    throw InvalidArgument("adapter: embedding and hidden dims must be > 0");
  }
  AdapterParams p;
  p.query = xavier_uniform(embedding_dim, cfg.gate_dim, rng);
  p.key = xavier_uniform(embedding_dim, cfg.gate_dim, rng);
  for (std::size_t l = 0; l < cfg.mlp_depth; ++l) {
    const std::size_t in = l == 0 ? embedding_dim : cfg.mlp_hidden;
    const bool last = l + 1 == cfg.mlp_depth;
    const std::size_t out = last ? hidden_dim : cfg.mlp_hidden;
    DenseLayer layer;
    layer.weight = last ? Matrix(in, out) : xavier_uniform(in, out, rng);
    layer.bias = Matrix(1, out);
    p.mlp.push_back(std::move(layer));
  }
  return p;
}

GraphAdapter::GraphAdapter(AdapterParams params, AdapterConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (params_.mlp.empty()) throw InvalidArgument("adapter: MLP has no layers");
  if (!params_.key.same_shape(params_.query)) {
    throw InvalidArgument("adapter: W_q and W_k shapes differ");
  }
  std::size_t in = params_.embedding_dim();
  for (const auto& layer : params_.mlp) {
    if (layer.weight.rows() != in || layer.bias.rows() != 1 ||
        layer.bias.cols() != layer.weight.cols()) {
      throw InvalidArgument("adapter: inconsistent MLP layer shapes");
    }
    in = layer.weight.cols();
  }
  cfg_.mlp_depth = params_.mlp.size();
  cfg_.gate_dim = params_.gate_dim();
}

void GraphAdapter::check_embedding(std::span<const double> z) const {
  if (z.size() != params_.embedding_dim()) {
    throw InvalidArgument("adapter: embedding has " + std::to_string(z.size()) +
                          " dims, expected " + std::to_string(params_.embedding_dim()));
  }
}

double GraphAdapter::gate(std::span<const double> z_i, std::span<const double> z_j) const {
  check_embedding(z_i);
  check_embedding(z_j);
  if (cfg_.ablation == Ablation::kNoGate) return 0.5;
  return sigmoid(dot(vec_mat(z_i, params_.query), vec_mat(z_j, params_.key)));
}

Vector GraphAdapter::influence(std::span<const double> z_j) const {
  check_embedding(z_j);
  Vector x(z_j.begin(), z_j.end());
  for (std::size_t l = 0; l < params_.mlp.size(); ++l) {
    const auto& layer = params_.mlp[l];
    Vector y = vec_mat(x, layer.weight);
    for (std::size_t c = 0; c < y.size(); ++c) y[c] += layer.bias(0, c);
    if (l + 1 < params_.mlp.size()) {
      for (double& v : y) v = std::max(v, 0.0);
    }
    x = std::move(y);
  }
  return x;
}

Vector GraphAdapter::fuse(std::span<const double> hidden, std::span<const double> z_i,
                          std::span<const double> z_j) const {
  if (hidden.size() != params_.hidden_dim()) {
    throw InvalidArgument("adapter: hidden state dim mismatch");
  }
  const double a = gate(z_i, z_j);
  const Vector g = influence(z_j);
  Vector out(hidden.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a * hidden[k] + (1.0 - a) * g[k];
  return out;
}

Vector GraphAdapter::edge_predict(const LmHead& head, std::span<const double> hidden,
                                  std::span<const double> z_i,
                                  std::span<const double> z_j) const {
  return head.predict(fuse(hidden, z_i, z_j));
}

EdgeForward GraphAdapter::forward(const LmHead& head, std::span<const double> hidden,
                                  std::span<const double> z_i,
                                  std::span<const double> z_j) const {
  check_embedding(z_i);
  check_embedding(z_j);
  if (hidden.size() != params_.hidden_dim() || head.hidden_dim() != hidden.size()) {
    throw InvalidArgument("adapter: hidden state dim mismatch");
  }
  EdgeForward f;
  if (cfg_.ablation == Ablation::kNoGate) {
    f.gate = 0.5;
  } else {
    f.q = vec_mat(z_i, params_.query);
    f.k = vec_mat(z_j, params_.key);
    f.gate = sigmoid(dot(f.q, f.k));
  }
  const std::size_t depth = params_.mlp.size();
  f.pre.resize(depth);
  f.post.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = params_.mlp[l];
    const std::span<const double> x = l == 0 ? z_j : std::span<const double>(f.post[l - 1]);
    f.pre[l] = vec_mat(x, layer.weight);
    for (std::size_t c = 0; c < f.pre[l].size(); ++c) f.pre[l][c] += layer.bias(0, c);
    f.post[l] = f.pre[l];
    if (l + 1 < depth) {
      for (double& v : f.post[l]) v = std::max(v, 0.0);
    }
  }
  const Vector& g = f.post.back();
  f.fused.resize(hidden.size());
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    f.fused[k] = f.gate * hidden[k] + (1.0 - f.gate) * g[k];
  }
  f.probs = head.predict(f.fused);
  return f;
}

Vector GraphAdapter::node_predict(const LmHead& head, std::span<const double> hidden,
                                  std::span<const double> z_i, const Matrix& embeddings,
                                  std::span<const NodeId> neighbors, Pooling pooling) const {
  if (neighbors.empty()) throw EmptyNeighborhood("node_predict: empty neighbourhood");
  Vector acc(head.vocab_size(), 0.0);
  for (NodeId j : neighbors) {
    if (j >= embeddings.rows()) throw InvalidArgument("node_predict: neighbour out of range");
    const Vector p = edge_predict(head, hidden, z_i, embeddings.row(j));
    if (pooling == Pooling::kArithmetic) {
      for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += p[t];
    } else {
      for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += std::log(std::max(p[t], 1e-300));
    }
  }
  const double n = static_cast<double>(neighbors.size());
  if (pooling == Pooling::kArithmetic) {
    for (double& v : acc) v /= n;
    return acc;
  }
  for (double& v : acc) v /= n;
  return softmax(acc);  // exp(mean log p), renormalised
}

double loss_geometric(const GraphAdapter& adapter, const LmHead& head,
                      std::span<const double> hidden, TokenId token,
                      std::span<const double> z_i, const Matrix& embeddings,
                      std::span<const NodeId> neighbors) {
  if (neighbors.empty()) throw EmptyNeighborhood("loss_geometric: empty neighbourhood");
  double total = 0.0;
  for (NodeId j : neighbors) {
    if (j >= embeddings.rows()) throw InvalidArgument("loss_geometric: neighbour out of range");
    total += cross_entropy(adapter.edge_predict(head, hidden, z_i, embeddings.row(j)), token);
  }
  return total / static_cast<double>(neighbors.size());
}

TrainingSet TrainingSet::from_bundle(const Bundle& bundle) {
  std::vector<std::size_t> all(bundle.masked.size());
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  return from_bundle(bundle, all);
}

TrainingSet TrainingSet::from_bundle(const Bundle& bundle, std::span<const std::size_t> records) {
  TrainingSet s;
  s.embeddings = widen(bundle.embeddings);
  for (std::size_t r : records) {
    if (r >= bundle.masked.size()) throw InvalidArgument("training set: record index out of range");
    const auto& m = bundle.masked[r];
    s.hidden.emplace_back(m.hidden.begin(), m.hidden.end());
    s.tokens.push_back(m.token);
    s.nodes.push_back(m.node);
  }
  return s;
}

namespace {

// Accumulates w·∂CE/∂Θ for one pair into `g`; returns w·CE.
double backprop_pair(const GraphAdapter& adapter, const LmHead& head, const TrainingSet& data,
                     const PairSample& pair, AdapterParams& g) {
  const auto& params = adapter.params();
  const auto hidden = std::span<const double>(data.hidden[pair.record]);
  const TokenId y = data.tokens[pair.record];
  const auto z_i = data.embeddings.row(data.nodes[pair.record]);
  const auto z_j = data.embeddings.row(pair.neighbor);
  const EdgeForward f = adapter.forward(head, hidden, z_i, z_j);

  const double w = pair.weight;
  const double loss = w * cross_entropy(f.probs, y);
  if (f.probs[y] <= kLogFloor) return loss;  // clamped: no gradient

  Vector dlogits = f.probs;
  dlogits[y] -= 1.0;
  for (double& v : dlogits) v *= w;
  const Vector dfused = head.backward(dlogits);

  const Vector& infl = f.post.back();
  const double a = f.gate;
  if (adapter.config().ablation != Ablation::kNoGate) {
    double da = 0.0;
    for (std::size_t k = 0; k < dfused.size(); ++k) da += dfused[k] * (hidden[k] - infl[k]);
    const double ds = da * a * (1.0 - a);
    add_outer(g.query, z_i, f.k, ds);
    add_outer(g.key, z_j, f.q, ds);
  }

  Vector delta(dfused.size());
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = (1.0 - a) * dfused[k];
  for (std::size_t l = params.mlp.size(); l-- > 0;) {
    const std::span<const double> x = l == 0 ? z_j : std::span<const double>(f.post[l - 1]);
    add_outer(g.mlp[l].weight, x, delta, 1.0);
    auto db = g.mlp[l].bias.row(0);
    for (std::size_t c = 0; c < delta.size(); ++c) db[c] += delta[c];
    if (l == 0) break;
    Vector dx = mat_vec(params.mlp[l].weight, delta);
    const Vector& pre = f.pre[l - 1];
    for (std::size_t c = 0; c < dx.size(); ++c) {
      if (pre[c] <= 0.0) dx[c] = 0.0;
    }
    delta = std::move(dx);
  }
  return loss;
}

}  // namespace

LossAndGrads loss_and_grads(const GraphAdapter& adapter, const LmHead& head,
                            const TrainingSet& data, std::span<const PairSample> batch,
                            std::size_t threads) {
  if (batch.empty()) throw InvalidArgument("loss_and_grads: empty batch");
  for (const auto& p : batch) {
    if (p.record >= data.size()) throw InvalidArgument("loss_and_grads: record out of range");
    if (p.neighbor >= data.embeddings.rows()) {
      throw InvalidArgument("loss_and_grads: neighbour out of range");
    }
  }
  const std::size_t chunks = (batch.size() + kPairChunk - 1) / kPairChunk;
  std::vector<AdapterParams> chunk_grads(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<double> chunk_weight(chunks, 0.0);
  parallel_for(chunks, worker_count(threads), [&](std::size_t c) {
    AdapterParams g = adapter.params().zeros_like();
    const std::size_t end = std::min(batch.size(), (c + 1) * kPairChunk);
    for (std::size_t i = c * kPairChunk; i < end; ++i) {
      chunk_loss[c] += backprop_pair(adapter, head, data, batch[i], g);
      chunk_weight[c] += batch[i].weight;
    }
    chunk_grads[c] = std::move(g);
  });

  LossAndGrads out;
  out.grads = std::move(chunk_grads[0]);
  double loss = chunk_loss[0];
  double weight = chunk_weight[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    add_into(out.grads, chunk_grads[c]);
    loss += chunk_loss[c];
    weight += chunk_weight[c];
  }
  if (!(weight > 0.0)) throw InvalidArgument("loss_and_grads: batch weights sum to zero");
  scale_all(out.grads, 1.0 / weight);
  out.loss = loss / weight;
  out.weight_sum = weight;
  return out;
}

GradCheckReport check_gradients(const GraphAdapter& adapter, const LmHead& head,
                                const TrainingSet& data, std::span<const PairSample> batch,
                                double eps, std::size_t max_per_tensor, std::uint64_t seed) {
  const AdapterParams& shape = adapter.params();
  const AdapterConfig& cfg = adapter.config();
  const std::vector<Matrix> start = shape.tensors();
  LossWithGrad fn = [&](std::span<const Matrix> t, std::vector<Matrix>* grads) {
    const GraphAdapter probe(shape.with_tensors(t), cfg);
    LossAndGrads lg = loss_and_grads(probe, head, data, batch);
    if (grads) *grads = lg.grads.tensors();
    return lg.loss;
  };
  return finite_diff_check(fn, start, eps, max_per_tensor, seed);
}

GradCheckReport check_bundle_gradients(const Bundle& bundle, const AdapterConfig& cfg,
                                       const GradCheckOptions& opts) {
  if (bundle.masked.empty()) throw InvalidArgument("grad check: bundle has no masked records");
  if (opts.records == 0) throw InvalidArgument("grad check: records must be > 0");
  std::vector<std::size_t> records(std::min(opts.records, bundle.masked.size()));
  for (std::size_t r = 0; r < records.size(); ++r) records[r] = r;
  const TrainingSet data = TrainingSet::from_bundle(bundle, records);
  const LmHead head = LmHead::from_bundle(bundle);
  const Graph graph = training_graph(bundle, cfg, opts.self_loops);

  std::mt19937_64 rng(opts.seed);
  const AdapterParams init = init_adapter(cfg, bundle.embedding_dim(), bundle.hidden_dim(), rng);
  std::vector<Matrix> tensors = init.tensors();
  std::normal_distribution<double> noise(0.0, opts.perturb);
  for (Matrix& m : tensors) {
    for (double& v : m.values()) v += noise(rng);
  }
  const GraphAdapter adapter(init.with_tensors(tensors), cfg);

  std::vector<PairSample> batch;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto sampled = sample_neighbors(graph, data.nodes[r], opts.sample_k, rng);
    for (NodeId j : sampled) batch.push_back({r, j, 1.0 / static_cast<double>(sampled.size())});
  }
  return check_gradients(adapter, head, data, batch, opts.eps, opts.max_per_tensor, opts.seed);
}

Graph training_graph(const Bundle& bundle, const AdapterConfig& adapter_cfg, bool self_loops) {
  if (adapter_cfg.ablation == Ablation::kNoGraph) return self_loop_graph(bundle.num_nodes());
  return self_loops ? add_self_loops(bundle.graph) : bundle.graph;
}

TrainResult train(const Bundle& bundle, const AdapterConfig& adapter_cfg,
                  const TrainConfig& train_cfg, const EpochCallback& on_epoch) {
  std::vector<std::size_t> all(bundle.masked.size());
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  return train(bundle, all, adapter_cfg, train_cfg, on_epoch);
}

TrainResult train(const Bundle& bundle, std::span<const std::size_t> records,
                  const AdapterConfig& adapter_cfg, const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch) {
  using Clock = std::chrono::steady_clock;
  train_cfg.validate();
  std::mt19937_64 init_rng(train_cfg.seed);
  AdapterParams params =
      init_adapter(adapter_cfg, bundle.embedding_dim(), bundle.hidden_dim(), init_rng);
  if (adapter_cfg.ablation == Ablation::kNoSsl) {
    return {GraphAdapter(std::move(params), adapter_cfg), {}};
  }
  if (records.empty()) throw InvalidArgument("train: no masked-token records");
  if (train_cfg.epochs == 0) return {GraphAdapter(std::move(params), adapter_cfg), {}};

  const LmHead head = LmHead::from_bundle(bundle);
  const TrainingSet data = TrainingSet::from_bundle(bundle, records);
  const Graph graph = training_graph(bundle, adapter_cfg, train_cfg.self_loops);

  std::size_t pairs_per_epoch = 0;
  for (NodeId node : data.nodes) {
    pairs_per_epoch += std::min(train_cfg.sample_k, graph.degree(node));
  }
  const std::uint64_t steps_per_epoch =
      (pairs_per_epoch + train_cfg.batch_pairs - 1) / train_cfg.batch_pairs;
  const std::uint64_t total_steps = steps_per_epoch * train_cfg.epochs;

  AdamWConfig opt;
  opt.lr = train_cfg.lr;
  opt.weight_decay = train_cfg.weight_decay;
  opt.warmup_steps =
      static_cast<std::uint64_t>(train_cfg.warmup_fraction * static_cast<double>(total_steps));
  std::vector<Matrix> tensors = params.tensors();
  OptimizerState state = make_optimizer_state(tensors, opt);

  std::mt19937_64 sample_rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  GraphAdapter adapter(params, adapter_cfg);
  TrainHistory history;
  const auto start = Clock::now();
  std::vector<PairSample> pairs;
  pairs.reserve(pairs_per_epoch);

  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    pairs.clear();
    for (std::size_t r = 0; r < data.size(); ++r) {
      const auto sampled = sample_neighbors(graph, data.nodes[r], train_cfg.sample_k, sample_rng);
      const double w = 1.0 / static_cast<double>(sampled.size());
      for (NodeId j : sampled) pairs.push_back({r, j, w});
    }

    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += train_cfg.batch_pairs) {
      const std::size_t len = std::min(train_cfg.batch_pairs, pairs.size() - begin);
      const LossAndGrads lg = loss_and_grads(
          adapter, head, data, std::span(pairs).subspan(begin, len), train_cfg.threads);
      if (!std::isfinite(lg.loss)) throw NumericalFailure("train: non-finite loss");
      loss_sum += lg.loss * lg.weight_sum;
      weight_sum += lg.weight_sum;

      AdamWResult step = adamw_step(tensors, lg.grads.tensors(), state);
      tensors = std::move(step.params);
      state = std::move(step.state);
      if (train_cfg.precision == Precision::kFloat32) {
        for (Matrix& m : tensors) {
          for (double& v : m.values()) v = static_cast<float>(v);
        }
      }
      params = params.with_tensors(tensors);
      adapter = GraphAdapter(params, adapter_cfg);
      ++history.steps;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / weight_sum;
    stats.seconds = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  history.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::move(adapter), std::move(history)};
}

std::vector<std::byte> serialize_adapter(const AdapterParams& params, std::size_t mlp_hidden) {
  detail::ByteWriter w;
  w.magic(kAdapterMagic);
  w.u32(kAdapterVersion);
  w.u32(static_cast<std::uint32_t>(params.embedding_dim()));
  w.u32(static_cast<std::uint32_t>(params.gate_dim()));
  w.u32(static_cast<std::uint32_t>(params.hidden_dim()));
  w.u32(static_cast<std::uint32_t>(params.mlp.size()));
  w.u32(static_cast<std::uint32_t>(params.mlp.size() > 1 ? params.mlp[0].weight.cols()
                                                         : mlp_hidden));
  for (const Matrix& t : params.tensors()) w.f32s(narrow(t).values());
  return w.take();
}

AdapterFile deserialize_adapter(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kAdapterMagic.size()) throw IoError("truncated file: missing magic");
  if (!r.magic(kAdapterMagic)) throw FormatError("bad magic: not a GPA1 adapter");
  const std::uint32_t version = r.u32();
  if (version != kAdapterVersion) {
    throw FormatError("unsupported adapter version " + std::to_string(version));
  }
  const std::size_t dz = r.u32();
  const std::size_t da = r.u32();
  const std::size_t d = r.u32();
  const std::size_t depth = r.u32();
  const std::size_t hidden = r.u32();
  if (dz == 0 || da == 0 || d == 0 || depth == 0 || (depth > 1 && hidden == 0)) {
    throw ValidationError("adapter: zero dimension in header");
  }
  auto read_matrix = [&](std::size_t rows, std::size_t cols) {
    r.need(rows, 4 * cols);
    MatrixF m(rows, cols);
    r.f32s(m.values());
    if (!all_finite(m.values())) throw ValidationError("adapter: non-finite parameter");
    return widen(m);
  };
  AdapterFile file;
  file.mlp_depth = depth;
  file.mlp_hidden = hidden;
  file.params.query = read_matrix(dz, da);
  file.params.key = read_matrix(dz, da);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t in = l == 0 ? dz : hidden;
    const std::size_t out = l + 1 == depth ? d : hidden;
    DenseLayer layer;
    layer.weight = read_matrix(in, out);
    layer.bias = read_matrix(1, out);
    file.params.mlp.push_back(std::move(layer));
  }
  if (r.remaining() != 0) {
    throw FormatError("adapter: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return file;
}

void save_adapter(const AdapterParams& params, std::size_t mlp_hidden,
                  const std::filesystem::path& path) {
  write_file(path, serialize_adapter(params, mlp_hidden));
}

AdapterFile load_adapter(const std::filesystem::path& path) {
  return deserialize_adapter(read_file(path));
}

}  // namespace gprompt
