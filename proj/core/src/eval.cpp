// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gprompt/parallel.hpp"

namespace gprompt {

std::size_t num_classes(std::span<const int> labels) {
  int mx = -1;
  for (int y : labels) {
    if (y < 0) throw InvalidArgument("labels must be non-negative class ids");
    mx = std::max(mx, y);
  }
  return static_cast<std::size_t>(mx + 1);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auc: scores/labels length mismatch");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidArgument("auc: labels must be 0/1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based midranks of the positives; every term is a half-integer,
  // so the sum is exact.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

void VocabSet::validate(std::size_t vocab_size) const {
  if (positive.empty() || negative.empty()) {
    throw InvalidArgument("vocab set '" + label + "': positive and negative lists must be nonempty");
  }
  std::set<TokenId> pos(positive.begin(), positive.end());
  for (TokenId t : positive) {
    if (t >= vocab_size) throw InvalidArgument("vocab set '" + label + "': token out of range");
  }
  for (TokenId t : negative) {
    if (t >= vocab_size) throw InvalidArgument("vocab set '" + label + "': token out of range");
    if (pos.count(t) != 0) {
      throw InvalidArgument("vocab set '" + label + "': token " + std::to_string(t) +
                            " in both lists");
    }
  }
}

Vector zero_shot_scores(const Matrix& probs, const VocabSet& set) {
  set.validate(probs.cols());
  Vector scores(probs.rows(), 0.0);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (TokenId t : set.positive) s += probs(i, t);
    for (TokenId t : set.negative) s -= probs(i, t);
    scores[i] = s;
  }
  return scores;
}

std::vector<int> zero_shot_predict(const Matrix& probs, std::span<const VocabSet> sets) {
  if (sets.empty()) throw InvalidArgument("zero_shot_predict: no vocab sets");
  for (const auto& s : sets) {
    if (s.positive.empty()) throw InvalidArgument("zero_shot_predict: empty positive list");
    for (TokenId t : s.positive) {
      if (t >= probs.cols()) throw InvalidArgument("zero_shot_predict: token out of range");
    }
  }
  std::vector<int> out(probs.rows(), 0);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double best = -1.0;
    for (std::size_t c = 0; c < sets.size(); ++c) {
      double s = 0.0;
      for (TokenId t : sets[c].positive) s += probs(i, t);
      if (s > best) {
        best = s;
        out[i] = static_cast<int>(c);
      }
    }
  }
  return out;
}

std::vector<TokenAuc> rank_tokens_by_auc(const Matrix& probs, std::span<const int> labels,
                                         std::size_t top_k, std::span<const TokenId> tokens) {
  if (labels.size() != probs.rows()) throw InvalidArgument("rank_tokens_by_auc: row mismatch");
  if (!tokens.empty() && tokens.size() != probs.cols()) {
    throw InvalidArgument("rank_tokens_by_auc: token list does not match columns");
  }
  if (top_k == 0) throw InvalidArgument("rank_tokens_by_auc: top_k must be >= 1");
  std::vector<TokenAuc> ranked(probs.cols());
  Vector column(probs.rows());
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    for (std::size_t r = 0; r < probs.rows(); ++r) column[r] = probs(r, c);
    ranked[c] = {tokens.empty() ? static_cast<TokenId>(c) : tokens[c], auc(column, labels)};
  }
  std::sort(ranked.begin(), ranked.end(), [](const TokenAuc& a, const TokenAuc& b) {
    if (a.auc != b.auc) return a.auc > b.auc;
    return a.token < b.token;
  });
  ranked.resize(std::min(top_k, ranked.size()));
  return ranked;
}

std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::kMlp ? "mlp" : "sage"; }

ClassifierKind parse_classifier(std::string_view s) {
  if (s == "mlp") return ClassifierKind::kMlp;
  if (s == "sage") return ClassifierKind::kSage;
  throw InvalidArgument("unknown classifier '" + std::string(s) + "'");
}

void FewShotConfig::validate() const {
  if (shots_per_class < 1) throw InvalidArgument("few-shot: shots_per_class must be >= 1");
  if (partitions < 1 || repeats < 1) {
    throw InvalidArgument("few-shot: partitions and repeats must be >= 1");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("few-shot: test_fraction must lie in (0, 1)");
  }
  if (layers < 1 || hidden < 1 || epochs < 1) {
    throw InvalidArgument("few-shot: layers, hidden and epochs must be >= 1");
  }
}

Split few_shot_split(std::span<const int> labels, const FewShotConfig& cfg,
                     std::uint64_t partition_seed) {
  cfg.validate();
  const std::size_t n = labels.size();
  const std::size_t classes = num_classes(labels);
  std::mt19937_64 rng(partition_seed);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_test = static_cast<std::size_t>(cfg.test_fraction * static_cast<double>(n));
  Split split;
  split.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> taken(classes, 0);
  for (std::size_t k = n_test; k < n; ++k) {
    const NodeId node = perm[k];
    auto& count = taken[static_cast<std::size_t>(labels[node])];
    if (count < cfg.shots_per_class) {
      split.train.push_back(node);
      ++count;
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (taken[c] < cfg.shots_per_class) {
      throw InvalidArgument("few-shot: class " + std::to_string(c) + " has only " +
                            std::to_string(taken[c]) + " labelled nodes outside the test set");
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Matrix standardize_columns(const Matrix& x) {
  Matrix out = x;
  Vector column(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x(r, c);
    const double mu = mean(column);
    const double sd = stddev(column);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      out(r, c) = sd > 0.0 ? (x(r, c) - mu) / sd : 0.0;
    }
  }
  return out;
}

namespace {

Matrix gather_rows(const Matrix& x, std::span<const NodeId> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  }
  return out;
}

void mask_relu(Matrix& grad, const Matrix& pre) {
  auto g = grad.values();
  const auto p = pre.values();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (p[k] <= 0.0) g[k] = 0.0;
  }
}

Matrix mean_aggregate(const Graph& g, const Matrix& h) {
  Matrix out(h.rows(), h.cols());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    auto orow = out.row(i);
    for (NodeId j : nb) {
      const auto hrow = h.row(j);
      for (std::size_t c = 0; c < orow.size(); ++c) orow[c] += hrow[c];
    }
    const double inv = nb.empty() ? 0.0 : 1.0 / static_cast<double>(nb.size());
    for (double& v : orow) v *= inv;
  }
  return out;
}

Matrix mean_aggregate_backward(const Graph& g, const Matrix& dout) {
  Matrix din(dout.rows(), dout.cols());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nb.size());
    const auto drow = dout.row(i);
    for (NodeId j : nb) {
      auto irow = din.row(j);
      for (std::size_t c = 0; c < irow.size(); ++c) irow[c] += inv * drow[c];
    }
  }
  return din;
}

// Softmax cross-entropy over all rows; returns mean loss and fills dlogits.
double softmax_ce(const Matrix& logits, std::span<const int> targets, Matrix& dlogits) {
  dlogits = Matrix(logits.rows(), logits.cols());
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const Vector p = softmax(logits.row(r));
    const auto y = static_cast<std::size_t>(targets[r]);
    loss += cross_entropy(p, y);
    for (std::size_t c = 0; c < p.size(); ++c) dlogits(r, c) = inv * (p[c] - (c == y ? 1.0 : 0.0));
  }
  return loss * inv;
}

class Classifier {
 public:
  Classifier(const FewShotConfig& cfg, std::size_t in, std::size_t classes, std::uint64_t seed)
      : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    const std::size_t dense = cfg.classifier == ClassifierKind::kMlp ? cfg.layers : cfg.layers + 1;
    std::size_t width = in;
    for (std::size_t l = 0; l < dense; ++l) {
      const std::size_t out = l + 1 == dense ? classes : cfg.hidden;
      tensors_.push_back(xavier_uniform(width, out, rng));
      tensors_.emplace_back(1, out);
      width = out;
    }
  }

  std::vector<Matrix>& tensors() { return tensors_; }
  std::size_t dense_layers() const { return tensors_.size() / 2; }
  const Matrix& weight(std::size_t l) const { return tensors_[2 * l]; }
  const Matrix& bias(std::size_t l) const { return tensors_[2 * l + 1]; }

  // MLP: x holds only the rows of interest.
  Matrix mlp_forward(const Matrix& x, std::vector<Matrix>* acts, std::vector<Matrix>* pres) const {
    Matrix h = x;
    for (std::size_t l = 0; l < dense_layers(); ++l) {
      if (acts) acts->push_back(h);
      Matrix pre = matmul(h, weight(l));
      add_bias(pre, bias(l));
      if (l + 1 == dense_layers()) return pre;
      if (pres) pres->push_back(pre);
      h = relu(pre);
    }
    return h;
  }

  std::vector<Matrix> mlp_grads(const Matrix& x, std::span<const int> y, double* loss) const {
    std::vector<Matrix> acts, pres;
    const Matrix logits = mlp_forward(x, &acts, &pres);
    Matrix d;
    *loss = softmax_ce(logits, y, d);
    std::vector<Matrix> grads(tensors_.size());
    for (std::size_t l = dense_layers(); l-- > 0;) {
      grads[2 * l] = matmul_tn(acts[l], d);
      grads[2 * l + 1] = column_sums(d);
      if (l == 0) break;
      Matrix dh = matmul_nt(d, weight(l));
      mask_relu(dh, pres[l - 1]);
      d = std::move(dh);
    }
    return grads;
  }

  // Sage: full-graph forward; returns logits for every node.
  Matrix sage_forward(const Matrix& x, const Graph& g, std::vector<Matrix>* hs,
                      std::vector<Matrix>* pres) const {
    Matrix h = x;
    const std::size_t rounds = dense_layers() - 1;
    for (std::size_t l = 0; l < rounds; ++l) {
      if (hs) hs->push_back(h);
      Matrix pre = matmul(h, weight(l));
      add_bias(pre, bias(l));
      h = mean_aggregate(g, relu(pre));
      if (pres) pres->push_back(std::move(pre));
    }
    if (hs) hs->push_back(h);
    Matrix logits = matmul(h, weight(rounds));
    add_bias(logits, bias(rounds));
    return logits;
  }

  std::vector<Matrix> sage_grads(const Matrix& x, const Graph& g, std::span<const NodeId> train,
                                 std::span<const int> y, double* loss) const {
    std::vector<Matrix> hs, pres;
    const Matrix logits = sage_forward(x, g, &hs, &pres);
    Matrix dtrain;
    *loss = softmax_ce(gather_rows(logits, train), y, dtrain);
    Matrix d(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::copy(dtrain.row(i).begin(), dtrain.row(i).end(), d.row(train[i]).begin());
    }
    const std::size_t rounds = dense_layers() - 1;
    std::vector<Matrix> grads(tensors_.size());
    grads[2 * rounds] = matmul_tn(hs[rounds], d);
    grads[2 * rounds + 1] = column_sums(d);
    Matrix dh = matmul_nt(d, weight(rounds));
    for (std::size_t l = rounds; l-- > 0;) {
      Matrix dpre = mean_aggregate_backward(g, dh);
      mask_relu(dpre, pres[l]);
      grads[2 * l] = matmul_tn(hs[l], dpre);
      grads[2 * l + 1] = column_sums(dpre);
      if (l > 0) dh = matmul_nt(dpre, weight(l));
    }
    return grads;
  }

 private:
  FewShotConfig cfg_;
  std::vector<Matrix> tensors_;
};

}  // namespace

double train_classifier(const Matrix& x, const Graph& graph, std::span<const int> labels,
                        const Split& split, const FewShotConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (labels.size() != x.rows()) throw InvalidArgument("classifier: label/feature row mismatch");
  if (split.train.empty() || split.test.empty()) {
    throw InvalidArgument("classifier: degenerate split (empty train or test)");
  }
  for (NodeId i : split.train) {
    if (i >= x.rows()) throw InvalidArgument("classifier: split id out of range");
  }
  for (NodeId i : split.test) {
    if (i >= x.rows()) throw InvalidArgument("classifier: split id out of range");
  }
  const std::size_t classes = std::max<std::size_t>(num_classes(labels), 2);
  const bool sage = cfg.classifier == ClassifierKind::kSage;
  if (sage && graph.num_nodes() != x.rows()) {
    throw InvalidArgument("classifier: graph/feature row mismatch");
  }
  const Graph agg_graph = sage ? add_self_loops(graph) : Graph();

  std::vector<int> y_train;
  for (NodeId i : split.train) y_train.push_back(labels[i]);
  const Matrix x_train = sage ? Matrix() : gather_rows(x, split.train);

  Classifier net(cfg, x.cols(), classes, seed);
  AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  OptimizerState state = make_optimizer_state(net.tensors(), opt);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    const std::vector<Matrix> grads = sage ? net.sage_grads(x, agg_graph, split.train, y_train, &loss)
                                           : net.mlp_grads(x_train, y_train, &loss);
    AdamWResult step = adamw_step(net.tensors(), grads, state);
    net.tensors() = std::move(step.params);
    state = std::move(step.state);
  }

  const Matrix logits = sage ? gather_rows(net.sage_forward(x, agg_graph, nullptr, nullptr), split.test)
                             : net.mlp_forward(gather_rows(x, split.test), nullptr, nullptr);
  std::vector<int> y_test;
  for (NodeId i : split.test) y_test.push_back(labels[i]);

  if (num_classes(labels) == 2) {
    Vector scores(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) scores[r] = softmax(logits.row(r))[1];
    return auc(scores, y_test);
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == y_test[r] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

MetricsReport MetricsReport::from_values(std::string metric, std::vector<double> values) {
  MetricsReport r;
  r.metric = std::move(metric);
  r.mean = gprompt::mean(values);
  r.std = gprompt::stddev(values);
  r.values = std::move(values);
  return r;
}

MetricsReport run_protocol(const Matrix& x, const Graph& graph, std::span<const int> labels,
                           const FewShotConfig& cfg) {
  cfg.validate();
  const Matrix features = cfg.standardize ? standardize_columns(x) : x;
  std::vector<Split> splits;
  for (std::size_t p = 0; p < cfg.partitions; ++p) {
    splits.push_back(few_shot_split(labels, cfg, mix_seed(cfg.seed, p)));
  }
  const std::size_t runs = cfg.partitions * cfg.repeats;
  std::vector<double> values(runs, 0.0);
  parallel_for(runs, worker_count(cfg.threads), [&](std::size_t run) {
    const std::size_t p = run / cfg.repeats;
    const std::size_t r = run % cfg.repeats;
    const std::uint64_t seed = mix_seed(mix_seed(cfg.seed, p), 1'000 + r);
    values[run] = train_classifier(features, graph, labels, splits[p], cfg, seed);
  });
  return MetricsReport::from_values(num_classes(labels) == 2 ? "auc" : "accuracy",
                                    std::move(values));
}

}  // namespace gprompt
