// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "gprompt/eval.hpp"
#include "oracles.hpp"

using namespace gprompt;

namespace {

double auc_of(std::vector<double> s, std::vector<int> y) { return auc(s, y); }

// Two Gaussian blobs 8σ apart along the first axis, `per_class` nodes each.
struct Blobs {
  Matrix x;
  std::vector<int> labels;
};

Blobs blobs(std::size_t per_class, std::size_t classes, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Blobs b;
  b.x = Matrix(per_class * classes, 4);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t i = c * per_class + k;
      for (std::size_t d = 0; d < 4; ++d) b.x(i, d) = n(rng) + (d == c % 4 ? 8.0 : 0.0);
      b.labels.push_back(static_cast<int>(c));
    }
  }
  return b;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc_of({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc_of({0.9, 0.2, 0.8, 0.1}, {1, 0, 0, 1}) == 0.5);
  CHECK(auc_of({0.4, 0.4, 0.4}, {1, 0, 1}) == 0.5);
  CHECK(auc_of({0.1, 0.9}, {1, 0}) == 0.0);
  CHECK_THROWS_AS(auc_of({0.1, 0.2}, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(auc_of({0.1, 0.2}, {1, 2}), InvalidArgument);
  CHECK_THROWS_AS(auc_of({0.1}, {1, 0}), InvalidArgument);
}

TEST_CASE("auc equals the all-pairs count exactly") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> size(2, 100);
  std::uniform_int_distribution<int> coarse(0, 5), bit(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = size(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? coarse(rng) * 0.1 : std::generate_canonical<double, 53>(rng);
      y[i] = bit(rng);
    }
    y[0] = 1;
    y[1] = 0;
    const double a = auc(s, y);
    CHECK(a == oracle::auc(s, y));
    std::vector<int> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
    CHECK(a + auc(s, flipped) == 1.0);
  }
}

TEST_CASE("zero-shot scores") {
  const Matrix y(3, 3, std::vector<double>{0.5, 0.3, 0.2, 0.0, 1.0, 0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  const VocabSet s{"x", {0}, {1}};
  const Vector sc = zero_shot_scores(y, s);
  CHECK(sc[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(sc[1] == -1.0);
  CHECK(sc[2] == 0.0);
  CHECK(zero_shot_scores(y, VocabSet{"p", {1}, {2}})[1] == 1.0);

  CHECK_THROWS_AS(zero_shot_scores(y, VocabSet{"bad", {3}, {1}}), InvalidArgument);
  CHECK_THROWS_AS(zero_shot_scores(y, VocabSet{"empty", {}, {1}}), InvalidArgument);
  CHECK_THROWS_AS(zero_shot_scores(y, VocabSet{"overlap", {1}, {1, 2}}), InvalidArgument);

  // Permuting columns outside pos ∪ neg leaves every score unchanged.
  std::mt19937_64 rng(4);
  const Matrix big = oracle::random_matrix(20, 12, rng);
  const VocabSet set{"s", {2, 7}, {0, 5, 11}};
  const Vector base = zero_shot_scores(big, set);
  std::vector<std::size_t> free{1, 3, 4, 6, 8, 9, 10};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm = free;
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p = big;
    for (std::size_t r = 0; r < 20; ++r) {
      for (std::size_t k = 0; k < free.size(); ++k) p(r, free[k]) = big(r, perm[k]);
    }
    CHECK(zero_shot_scores(p, set) == base);
  }

  const std::vector<VocabSet> sets{{"a", {0}, {1}}, {"b", {1}, {0}}, {"c", {2}, {0}}};
  CHECK(zero_shot_predict(y, sets) == std::vector<int>{0, 1, 0});
}

TEST_CASE("token ranking") {
  const std::vector<int> labels{1, 0, 1, 0, 0};
  const Matrix y(5, 3, std::vector<double>{0.1, 1, 0.2, 0.1, 0, 0.5, 0.1, 1, 0.3, 0.1, 0, 0.1,
                                           0.1, 0, 0.9});
  const auto top = rank_tokens_by_auc(y, labels, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].token == 1);
  CHECK(top[0].auc == 1.0);
  CHECK(top[1].token == 0);
  CHECK(top[1].auc == 0.5);
  CHECK(top[2].token == 2);
  CHECK(rank_tokens_by_auc(y, labels, 1).size() == 1);

  const std::vector<TokenId> names{40, 10, 30};
  CHECK(rank_tokens_by_auc(y, labels, 2, names)[0].token == 10);

  std::mt19937_64 rng(6);
  const Matrix r = oracle::random_matrix(30, 25, rng);
  std::vector<int> lab(30);
  for (std::size_t i = 0; i < 30; ++i) lab[i] = static_cast<int>(i % 2);
  const auto full = rank_tokens_by_auc(r, lab, 25);
  std::set<TokenId> seen;
  for (std::size_t k = 0; k < full.size(); ++k) {
    seen.insert(full[k].token);
    if (k > 0) CHECK(full[k - 1].auc >= full[k].auc);
  }
  CHECK(seen.size() == 25);
  const auto top7 = rank_tokens_by_auc(r, lab, 7);
  for (std::size_t k = 0; k < 7; ++k) CHECK(top7[k].token == full[k].token);
}

TEST_CASE("few-shot split") {
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i % 4);
  FewShotConfig cfg;
  cfg.shots_per_class = 10;
  const Split s = few_shot_split(labels, cfg, 42);
  CHECK(s.test.size() == 120);
  CHECK(s.train.size() == 40);
  std::vector<int> per(4, 0);
  for (NodeId i : s.train) ++per[labels[i]];
  CHECK(per == std::vector<int>{10, 10, 10, 10});
  std::set<NodeId> test(s.test.begin(), s.test.end());
  for (NodeId i : s.train) CHECK(test.count(i) == 0);

  const Split again = few_shot_split(labels, cfg, 42);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK_FALSE(few_shot_split(labels, cfg, 43).test == s.test);

  cfg.shots_per_class = 1;
  const std::vector<int> two{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(few_shot_split(two, cfg, 0).train.size() == 2);

  cfg.shots_per_class = 30;
  CHECK_THROWS_AS(few_shot_split(labels, cfg, 0), InvalidArgument);
}

TEST_CASE("standardisation") {
  const Matrix x(3, 2, std::vector<double>{1, 5, 2, 5, 3, 5});
  const Matrix z = standardize_columns(x);
  CHECK(z(0, 0) == doctest::Approx(-std::sqrt(1.5)));
  CHECK(z(1, 0) == 0.0);
  for (std::size_t r = 0; r < 3; ++r) CHECK(z(r, 1) == 0.0);
}

TEST_CASE("classifiers") {
  std::mt19937_64 rng(10);
  FewShotConfig cfg;
  cfg.shots_per_class = 10;

  SUBCASE("separable binary data") {
    const Blobs b = blobs(60, 2, rng);
    const Graph g = Graph::from_edges(120, std::vector<std::pair<NodeId, NodeId>>{}, true);
    const Split s = few_shot_split(b.labels, cfg, 1);
    CHECK(train_classifier(b.x, g, b.labels, s, cfg, 3) >= 0.95);
    cfg.classifier = ClassifierKind::kSage;
    CHECK(train_classifier(b.x, g, b.labels, s, cfg, 3) >= 0.95);
  }
  SUBCASE("separable multi-class data") {
    const Blobs b = blobs(50, 4, rng);
    const Graph g = Graph::from_edges(200, std::vector<std::pair<NodeId, NodeId>>{}, true);
    const Split s = few_shot_split(b.labels, cfg, 2);
    CHECK(train_classifier(b.x, g, b.labels, s, cfg, 5) >= 0.95);
  }
  SUBCASE("constant features predict a single class") {
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) labels.push_back(i % 5 == 0 ? 1 : (i % 5 == 1 ? 2 : 0));
    const Matrix x(200, 3, 1.0);
    const Graph g = Graph::from_edges(200, std::vector<std::pair<NodeId, NodeId>>{}, true);
    const Split s = few_shot_split(labels, cfg, 3);
    double majority = 0.0;
    std::vector<double> count(3, 0.0);
    for (NodeId i : s.test) count[labels[i]] += 1.0;
    majority = *std::max_element(count.begin(), count.end()) / static_cast<double>(s.test.size());
    const double acc = train_classifier(x, g, labels, s, cfg, 0);
    CHECK(acc <= majority + 1e-12);
    bool is_class_rate = false;
    for (double c : count) is_class_rate |= acc == c / static_cast<double>(s.test.size());
    CHECK(is_class_rate);
  }
}

TEST_CASE("protocol") {
  std::mt19937_64 rng(12);
  const Blobs b = blobs(40, 2, rng);
  const Graph g = Graph::from_edges(80, std::vector<std::pair<NodeId, NodeId>>{}, true);
  FewShotConfig cfg;
  cfg.epochs = 50;
  cfg.partitions = 1;
  cfg.repeats = 1;
  const MetricsReport one = run_protocol(b.x, g, b.labels, cfg);
  CHECK(one.values.size() == 1);
  CHECK(one.std == 0.0);
  CHECK(one.metric == "auc");

  cfg.partitions = 5;
  cfg.repeats = 5;
  const MetricsReport full = run_protocol(b.x, g, b.labels, cfg);
  CHECK(full.values.size() == 25);
  CHECK(full.mean == doctest::Approx(mean(full.values)));
  CHECK(full.std == doctest::Approx(stddev(full.values)));
  cfg.threads = 3;
  CHECK(run_protocol(b.x, g, b.labels, cfg).values == full.values);

  const MetricsReport r = MetricsReport::from_values("accuracy", {0.5, 0.7});
  CHECK(r.mean == doctest::Approx(0.6));
  CHECK(r.std == doctest::Approx(0.1));
  CHECK(num_classes(std::vector<int>{0, 2, 1, 2}) == 3);
}
