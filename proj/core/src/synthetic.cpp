// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace gprompt {

SynthConfig SynthConfig::tiny(std::uint64_t seed) {
  SynthConfig c;
  c.num_nodes = 12;
  c.num_topics = 2;
  c.tokens_per_topic = 3;
  c.common_tokens = 2;
  c.vocab_size = 8;
  c.p_in = 0.5;
  c.p_out = 0.1;
  c.masks_per_node = 1;
  c.hidden_dim = 6;
  c.embedding_dim = 4;
  c.seed = seed;
  return c;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("synth: " + what); };
  if (num_nodes == 0) fail("num_nodes must be > 0");
  if (num_topics == 0) fail("num_topics must be > 0");
  if (tokens_per_topic == 0) fail("tokens_per_topic must be > 0");
  if (num_topics * tokens_per_topic + common_tokens != vocab_size) {
    fail("num_topics*tokens_per_topic + common_tokens must equal vocab_size");
  }
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    fail("edge probabilities must lie in [0, 1]");
  }
  if (!(context_weight >= 0.0 && context_weight <= 1.0)) fail("context_weight must lie in [0, 1]");
  if (!(embedding_noise >= 0.0) || !(hidden_noise >= 0.0)) fail("noise scales must be >= 0");
  if (!std::isfinite(topic_signal) || !std::isfinite(head_scale) || !std::isfinite(hidden_scale)) {
    fail("scales must be finite");
  }
  if (hidden_dim == 0 || embedding_dim == 0) fail("dimensions must be > 0");
  if (embedding_dim < num_topics) fail("embedding_dim must be >= num_topics for orthonormal codes");
}

int SynthTruth::token_topic(TokenId t) const {
  const std::size_t topic = t / config.tokens_per_topic;
  return topic < config.num_topics ? static_cast<int>(topic) : -1;
}

std::vector<TokenId> SynthTruth::topic_tokens(int topic) const {
  std::vector<TokenId> out;
  const std::size_t base = static_cast<std::size_t>(topic) * config.tokens_per_topic;
  for (std::size_t k = 0; k < config.tokens_per_topic; ++k) {
    out.push_back(static_cast<TokenId>(base + k));
  }
  return out;
}

Vector SynthTruth::context_center(int topic) const {
  const double lambda = config.context_weight;
  Vector c(topic_means.cols());
  for (std::size_t k = 0; k < c.size(); ++k) {
    c[k] = config.hidden_scale *
           (lambda * topic_means(static_cast<std::size_t>(topic), k) + (1.0 - lambda) * context_mean[k]);
  }
  return c;
}

namespace {

void normalize(std::span<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = cfg.num_nodes;
  const std::size_t c = cfg.num_topics;
  const std::size_t t = cfg.vocab_size;
  const std::size_t d = cfg.hidden_dim;
  const std::size_t dz = cfg.embedding_dim;

  SynthTruth truth;
  truth.config = cfg;

  std::uniform_int_distribution<int> pick_topic(0, static_cast<int>(c) - 1);
  truth.topics.resize(n);
  for (int& topic : truth.topics) topic = pick_topic(rng);

  truth.token_embeddings = Matrix(t, d);
  for (std::size_t k = 0; k < t; ++k) {
    auto row = truth.token_embeddings.row(k);
    for (double& v : row) v = normal(rng);
    normalize(row);
  }

  truth.topic_means = Matrix(c, d);
  truth.context_mean.assign(d, 0.0);
  for (std::size_t topic = 0; topic < c; ++topic) {
    auto mu = truth.topic_means.row(topic);
    for (std::size_t k = 0; k < cfg.tokens_per_topic; ++k) {
      const auto e = truth.token_embeddings.row(topic * cfg.tokens_per_topic + k);
      for (std::size_t q = 0; q < d; ++q) mu[q] += e[q];
    }
    for (std::size_t q = 0; q < d; ++q) {
      mu[q] /= static_cast<double>(cfg.tokens_per_topic);
      truth.context_mean[q] += mu[q] / static_cast<double>(c);
    }
  }

  // Gram-Schmidt on Gaussian draws gives orthonormal topic codes.
  truth.topic_codes = Matrix(c, dz);
  for (std::size_t topic = 0; topic < c; ++topic) {
    auto u = truth.topic_codes.row(topic);
    for (double& v : u) v = normal(rng);
    for (std::size_t prev = 0; prev < topic; ++prev) {
      const auto p = truth.topic_codes.row(prev);
      const double proj = dot(u, p);
      for (std::size_t q = 0; q < dz; ++q) u[q] -= proj * p[q];
    }
    normalize(u);
  }

  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = truth.topics[i] == truth.topics[j] ? cfg.p_in : cfg.p_out;
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  }

  Bundle bundle;
  bundle.graph = Graph::from_edges(n, edges, /*undirected=*/true);

  bundle.embeddings = MatrixF(n, dz);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = truth.topic_codes.row(static_cast<std::size_t>(truth.topics[i]));
    auto z = bundle.embeddings.row(i);
    for (std::size_t q = 0; q < dz; ++q) {
      z[q] = static_cast<float>(cfg.topic_signal * u[q] + cfg.embedding_noise * normal(rng));
    }
  }

  std::vector<Vector> centers;
  for (std::size_t topic = 0; topic < c; ++topic) {
    centers.push_back(truth.context_center(static_cast<int>(topic)));
  }
  auto noisy_hidden = [&](int topic) {
    std::vector<float> h(d);
    const Vector& center = centers[static_cast<std::size_t>(topic)];
    for (std::size_t q = 0; q < d; ++q) {
      h[q] = static_cast<float>(center[q] + cfg.hidden_noise * normal(rng));
    }
    return h;
  };

  std::uniform_int_distribution<std::size_t> pick_slot(0, cfg.tokens_per_topic - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int topic = truth.topics[i];
    for (std::size_t m = 0; m < cfg.masks_per_node; ++m) {
      MaskedTokenRecord rec;
      rec.node = i;
      rec.position = static_cast<std::uint32_t>(m);
      rec.token = static_cast<TokenId>(static_cast<std::size_t>(topic) * cfg.tokens_per_topic +
                                       pick_slot(rng));
      rec.hidden = noisy_hidden(topic);
      bundle.masked.push_back(std::move(rec));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < cfg.prompts_per_node; ++p) {
      PromptRecord rec;
      rec.node = i;
      rec.prompt_id = static_cast<std::uint32_t>(p);
      rec.hidden = noisy_hidden(truth.topics[i]);
      bundle.prompts.push_back(std::move(rec));
    }
  }

  bundle.head_weight = MatrixF(t, d);
  for (std::size_t k = 0; k < t; ++k) {
    for (std::size_t q = 0; q < d; ++q) {
      bundle.head_weight(k, q) = static_cast<float>(cfg.head_scale * truth.token_embeddings(k, q));
    }
  }
  bundle.head_bias.assign(t, 0.0f);

  std::vector<std::string> strings;
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t topic = k / cfg.tokens_per_topic;
    if (topic < c) {
      strings.push_back("topic" + std::to_string(topic) + "_w" +
                        std::to_string(k % cfg.tokens_per_topic));
    } else {
      strings.push_back("common_w" + std::to_string(k - c * cfg.tokens_per_topic));
    }
  }
  bundle.token_strings = std::move(strings);
  bundle.validate();
  return {std::move(bundle), std::move(truth)};
}

Vector bayes_topic_posterior(const SynthTruth& truth, const MaskedTokenRecord& record,
                             std::span<const int> neighbor_topics) {
  const SynthConfig& cfg = truth.config;
  const std::size_t c = cfg.num_topics;
  if (record.node >= truth.topics.size()) throw InvalidArgument("bayes: node out of range");

  // Topic counts among all other nodes (everyone but the record's node).
  std::vector<double> others(c, 0.0);
  for (std::size_t i = 0; i < truth.topics.size(); ++i) {
    if (i != record.node) others[static_cast<std::size_t>(truth.topics[i])] += 1.0;
  }
  std::vector<double> nb(c, 0.0);
  for (int topic : neighbor_topics) {
    if (topic < 0 || static_cast<std::size_t>(topic) >= c) {
      throw InvalidArgument("bayes: neighbour topic out of range");
    }
    nb[static_cast<std::size_t>(topic)] += 1.0;
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto log_term = [&](double count, double p) {
    if (count == 0.0) return 0.0;
    return p > 0.0 ? count * std::log(p) : kNegInf;
  };

  Vector log_post(c, 0.0);
  for (std::size_t topic = 0; topic < c; ++topic) {
    double lp = 0.0;
    const Vector center = truth.context_center(static_cast<int>(topic));
    double dist2 = 0.0;
    for (std::size_t q = 0; q < center.size(); ++q) {
      const double diff = static_cast<double>(record.hidden[q]) - center[q];
      dist2 += diff * diff;
    }
    if (cfg.hidden_noise > 0.0) {
      lp -= dist2 / (2.0 * cfg.hidden_noise * cfg.hidden_noise);
    } else if (dist2 > 1e-9) {
      lp = kNegInf;
    }
    for (std::size_t other = 0; other < c; ++other) {
      const double p = topic == other ? cfg.p_in : cfg.p_out;
      lp += log_term(nb[other], p) + log_term(others[other] - nb[other], 1.0 - p);
    }
    log_post[topic] = lp;
  }
  if (std::all_of(log_post.begin(), log_post.end(), [](double v) { return std::isinf(v); })) {
    return Vector(c, 1.0 / static_cast<double>(c));
  }
  return softmax(log_post);
}

Vector bayes_oracle(const SynthTruth& truth, const MaskedTokenRecord& record,
                    std::span<const int> neighbor_topics) {
  const Vector topic_post = bayes_topic_posterior(truth, record, neighbor_topics);
  Vector out(truth.config.vocab_size, 0.0);
  const double share = 1.0 / static_cast<double>(truth.config.tokens_per_topic);
  for (std::size_t topic = 0; topic < topic_post.size(); ++topic) {
    for (TokenId tok : truth.topic_tokens(static_cast<int>(topic))) {
      out[tok] = topic_post[topic] * share;
    }
  }
  return out;
}

int predicted_topic(const SynthTruth& truth, std::span<const double> probs) {
  const auto it = std::max_element(probs.begin(), probs.end());
  return truth.token_topic(static_cast<TokenId>(it - probs.begin()));
}

}  // namespace gprompt
