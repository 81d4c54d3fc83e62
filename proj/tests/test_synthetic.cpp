// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "gprompt/lm_head.hpp"
#include "gprompt/synthetic.hpp"

using namespace gprompt;

namespace {

std::vector<int> neighbor_topics(const SynthResult& s, NodeId i) {
  std::vector<int> out;
  for (NodeId j : s.bundle.graph.neighbors(i)) {
    if (j != i) out.push_back(s.truth.topics[j]);
  }
  return out;
}

double context_accuracy(const SynthResult& s) {
  const LmHead head = LmHead::from_bundle(s.bundle);
  std::size_t hit = 0;
  for (const auto& r : s.bundle.masked) {
    const Vector h(r.hidden.begin(), r.hidden.end());
    hit += predicted_topic(s.truth, head.predict(h)) == s.truth.topics[r.node];
  }
  return static_cast<double>(hit) / static_cast<double>(s.bundle.masked.size());
}

double oracle_accuracy(const SynthResult& s) {
  std::size_t hit = 0;
  for (const auto& r : s.bundle.masked) {
    hit += predicted_topic(s.truth, bayes_oracle(s.truth, r, neighbor_topics(s, r.node))) ==
           s.truth.topics[r.node];
  }
  return static_cast<double>(hit) / static_cast<double>(s.bundle.masked.size());
}

}  // namespace

TEST_CASE("default bundle is valid and matches its structure") {
  const SynthResult s = generate(SynthConfig{});
  const Bundle& b = s.bundle;
  CHECK_NOTHROW(b.validate());
  CHECK(b.num_nodes() == 500);
  CHECK(b.vocab_size() == 100);
  CHECK(b.masked.size() == 1500);
  CHECK(b.prompts.size() == 500);
  CHECK_FALSE(b.graph.self_loops_added());
  for (float v : b.head_bias) CHECK(v == 0.0f);

  for (const auto& r : b.masked) {
    CHECK(s.truth.token_topic(r.token) == s.truth.topics[r.node]);
  }
  const Matrix& u = s.truth.topic_codes;
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t c = 0; c < 4; ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < u.cols(); ++k) d += u(a, k) * u(c, k);
      CHECK(d == doctest::Approx(a == c ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
  for (std::size_t t = 0; t < 100; ++t) {
    double n = 0.0;
    for (std::size_t k = 0; k < s.truth.token_embeddings.cols(); ++k) {
      n += s.truth.token_embeddings(t, k) * s.truth.token_embeddings(t, k);
    }
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mean degree follows the block model") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Bundle b = generate(cfg).bundle;
    const double n = 500, pairs = n * (n - 1) / 2;
    const double p = 0.05 / 4 + 0.002 * 3 / 4;
    const double expected = (n - 1) * p;
    const double sigma = 2.0 * std::sqrt(pairs * p * (1 - p)) / n;
    const double got = static_cast<double>(b.graph.num_edges()) / n;
    CAPTURE(seed);
    CHECK(std::abs(got - expected) <= 3 * sigma);
  }
}

TEST_CASE("same seed gives byte-identical bundles") {
  SynthConfig cfg;
  cfg.num_nodes = 120;
  cfg.seed = 77;
  CHECK(serialize_bundle(generate(cfg).bundle) == serialize_bundle(generate(cfg).bundle));
  SynthConfig other = cfg;
  other.seed = 78;
  CHECK(serialize_bundle(generate(other).bundle) != serialize_bundle(generate(cfg).bundle));
}

TEST_CASE("context informativeness") {
  SynthConfig full;
  full.context_weight = 1.0;
  full.hidden_noise = 0.0;
  const SynthResult s1 = generate(full);
  CHECK(context_accuracy(s1) >= 0.99);

  SynthConfig none;
  none.context_weight = 0.0;
  const double a0 = context_accuracy(generate(none));
  CHECK(a0 <= 0.25 + 0.05);
}

TEST_CASE("oracle limits") {
  SynthConfig full;
  full.context_weight = 1.0;
  full.hidden_noise = 0.0;
  full.num_nodes = 100;
  const SynthResult s = generate(full);
  const LmHead head = LmHead::from_bundle(s.bundle);
  for (std::size_t k = 0; k < 30; ++k) {
    const auto& r = s.bundle.masked[k];
    const Vector post = bayes_topic_posterior(s.truth, r, neighbor_topics(s, r.node));
    const int topic = s.truth.topics[r.node];
    CHECK(post[static_cast<std::size_t>(topic)] == doctest::Approx(1.0));
    const Vector h(r.hidden.begin(), r.hidden.end());
    CHECK(predicted_topic(s.truth, head.predict(h)) == topic);
  }

  SynthConfig flat;
  flat.context_weight = 0.0;
  const SynthResult f = generate(flat);
  const auto& r = f.bundle.masked[0];
  for (int c = 0; c < 4; ++c) {
    const std::vector<int> nb(5, c);
    const Vector post = bayes_topic_posterior(f.truth, r, nb);
    CHECK(post[static_cast<std::size_t>(c)] > 0.99);
    const Vector tok = bayes_oracle(f.truth, r, nb);
    double s = 0.0;
    for (double v : tok) s += v;
    CHECK(s == doctest::Approx(1.0));
    const auto ids = f.truth.topic_tokens(c);
    for (TokenId t : ids) CHECK(tok[t] == doctest::Approx(tok[ids[0]]).epsilon(1e-15));
    for (std::size_t t = 80; t < 100; ++t) CHECK(tok[t] == 0.0);
  }
  const std::vector<int> bad{7};
  CHECK_THROWS_AS(bayes_topic_posterior(f.truth, r, bad), InvalidArgument);
}

TEST_CASE("oracle accuracy is at least context-only accuracy") {
  for (double lambda : {0.0, 0.2, 0.5, 1.0}) {
    for (std::uint64_t seed : {0u, 1u}) {
      SynthConfig cfg;
      cfg.context_weight = lambda;
      cfg.seed = seed;
      cfg.num_nodes = 300;
      const SynthResult s = generate(cfg);
      CAPTURE(lambda);
      CAPTURE(seed);
      CHECK(oracle_accuracy(s) >= context_accuracy(s));
    }
  }
}

TEST_CASE("config validation") {
  SynthConfig c;
  c.vocab_size = 99;
  CHECK_THROWS_AS(generate(c), InvalidArgument);
  c = SynthConfig{};
  c.context_weight = 1.5;
  CHECK_THROWS_AS(generate(c), InvalidArgument);
  c = SynthConfig{};
  c.p_in = -0.1;
  CHECK_THROWS_AS(generate(c), InvalidArgument);
  c = SynthConfig{};
  c.embedding_dim = 3;
  CHECK_THROWS_AS(generate(c), InvalidArgument);
  c = SynthConfig{};
  c.num_nodes = 0;
  CHECK_THROWS_AS(generate(c), InvalidArgument);
  CHECK_NOTHROW(generate(SynthConfig::tiny(3)).bundle.validate());
}
