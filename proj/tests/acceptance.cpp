// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance [scratch-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "gprompt/adapter.hpp"
#include "gprompt/eval.hpp"
#include "gprompt/features.hpp"
#include "gprompt/synthetic.hpp"
#include "oracles.hpp"

using namespace gprompt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector row_of(const Matrix& m, std::size_t r) {
  const auto s = m.row(r);
  return Vector(s.begin(), s.end());
}

GraphAdapter random_adapter(const AdapterConfig& cfg, std::size_t dz, std::size_t d,
                            std::mt19937_64& rng) {
  const AdapterParams init = init_adapter(cfg, dz, d, rng);
  std::vector<Matrix> t = init.tensors();
  for (Matrix& m : t) m = oracle::random_matrix(m.rows(), m.cols(), rng, 0.5);
  return GraphAdapter(init.with_tensors(t), cfg);
}

AdapterConfig small_adapter(Ablation ab = Ablation::kFull) {
  AdapterConfig c;
  c.gate_dim = 3;
  c.mlp_hidden = 5;
  c.ablation = ab;
  return c;
}

// Topic-level top-1: the arg-max token belongs to the record's topic.
double topic_accuracy(const SynthResult& s, std::span<const std::size_t> records,
                      const std::function<Vector(const MaskedTokenRecord&)>& predict) {
  std::size_t hit = 0;
  for (std::size_t r : records) {
    const MaskedTokenRecord& m = s.bundle.masked[r];
    hit += predicted_topic(s.truth, predict(m)) == s.truth.token_topic(m.token);
  }
  return static_cast<double>(hit) / static_cast<double>(records.size());
}

std::vector<int> neighbor_topics(const SynthResult& s, NodeId i) {
  std::vector<int> out;
  for (NodeId j : s.bundle.graph.neighbors(i)) out.push_back(s.truth.topics[j]);
  return out;
}

// Node-level holdout: masked records of nodes with id % 5 == 0 are never
// trained on. Returns {adapter accuracy per ablation..., oracle, context}.
struct HoldoutRun {
  std::map<Ablation, double> accuracy;
  double oracle = 0.0;
  double context = 0.0;
  double seconds = 0.0;
};

HoldoutRun holdout(const SynthResult& s, std::initializer_list<Ablation> ablations) {
  const Bundle& b = s.bundle;
  std::vector<std::size_t> train_set, held;
  for (std::size_t r = 0; r < b.masked.size(); ++r) {
    (b.masked[r].node % 5 == 0 ? held : train_set).push_back(r);
  }
  const LmHead head = LmHead::from_bundle(b);
  const Matrix z = widen(b.embeddings);
  HoldoutRun out;
  const auto t0 = Clock::now();
  for (Ablation ab : ablations) {
    AdapterConfig ac;
    ac.ablation = ab;
    const TrainResult tr = train(b, train_set, ac, TrainConfig{});
    const Graph g = training_graph(b, ac, true);
    out.accuracy[ab] = topic_accuracy(s, held, [&](const MaskedTokenRecord& m) {
      const Vector h(m.hidden.begin(), m.hidden.end());
      return tr.adapter.node_predict(head, h, row_of(z, m.node), z, g.neighbors(m.node));
    });
  }
  out.seconds = since(t0);
  out.oracle = topic_accuracy(s, held, [&](const MaskedTokenRecord& m) {
    return bayes_oracle(s.truth, m, neighbor_topics(s, m.node));
  });
  out.context = topic_accuracy(s, held, [&](const MaskedTokenRecord& m) {
    return head.predict(Vector(m.hidden.begin(), m.hidden.end()));
  });
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  AdapterConfig c;
  c.gate_dim = 4;
  c.mlp_hidden = 5;
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GradCheckOptions o;
    o.seed = seed;
    const GradCheckReport r = check_bundle_gradients(generate(SynthConfig::tiny(seed)).bundle, c, o);
    worst = std::max(worst, r.max_rel_error);
    coords += r.coordinates;
  }
  const double secs = since(t0);
  return {worst <= 1e-6 && secs < 30.0,
          fmt("max rel err %.3e over %zu coordinates, 5 instances, %.2fs (need <= 1e-6, < 30s)",
              worst, coords, secs)};
}

Outcome am_gm() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(2, 6);
  std::uniform_int_distribution<TokenId> token(0, 7);
  std::size_t bad = 0, equal_cases = 0, floored = 0;
  double min_gap_unequal = INFINITY, max_gap_equal = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const GraphAdapter a = random_adapter(small_adapter(), 4, 6, rng);
    const LmHead head(oracle::random_matrix(8, 6, rng, 2.0), oracle::random_vector(8, rng));
    const int n = count(rng);
    const bool equal = trial % 4 == 0;
    Matrix z = oracle::random_matrix(n, 4, rng);
    if (equal) {
      ++equal_cases;
      for (int j = 1; j < n; ++j) {
        for (std::size_t k = 0; k < 4; ++k) z(j, k) = z(0, k);
      }
    }
    std::vector<NodeId> nb(n);
    for (int j = 0; j < n; ++j) nb[j] = static_cast<NodeId>(j);
    const Vector h = oracle::random_vector(6, rng);
    const Vector zi = oracle::random_vector(4, rng);
    const TokenId y = token(rng);
    const double loss = loss_geometric(a, head, h, y, zi, z, nb);
    double m = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p = a.edge_predict(head, h, zi, row_of(z, j))[y];
      floored += p < kLogFloor;
      m += std::max(p, kLogFloor);
    }
    const double gap = loss + std::log(m / n);
    if (equal) {
      max_gap_equal = std::max(max_gap_equal, std::abs(gap));
      bad += std::abs(gap) > 1e-12;
    } else {
      min_gap_unequal = std::min(min_gap_unequal, gap);
      bad += !(gap > 1e-12);
    }
  }
  return {bad == 0, fmt("1000 instances (%zu all-equal, %zu edge probs below the log floor): max "
                        "|gap| equal %.2e, min gap unequal %.2e, %zu violations",
                        equal_cases, floored, max_gap_equal, min_gap_unequal, bad)};
}

Outcome graph_gain() {
  const SynthResult s = generate(SynthConfig{});
  const HoldoutRun r = holdout(s, {Ablation::kFull, Ablation::kNoGraph});
  const double full = r.accuracy.at(Ablation::kFull), nog = r.accuracy.at(Ablation::kNoGraph);
  const bool pass =
      full - nog >= 0.10 && full <= r.oracle && nog <= r.oracle && r.seconds < 120.0;
  return {pass, fmt("held-out topic top-1: full %.4f, no_graph %.4f (gain %.1f pts, need >= 10), "
                    "oracle %.4f, %.1fs (need < 120s)",
                    full, nog, 100 * (full - nog), r.oracle, r.seconds)};
}

Outcome context_envelope() {
  SynthConfig sc;
  sc.context_weight = 0.0;
  const SynthResult s = generate(sc);
  const HoldoutRun r = holdout(s, {Ablation::kFull});
  const double full = r.accuracy.at(Ablation::kFull);
  return {r.context < full && full < r.oracle,
          fmt("lambda=0 held-out topic top-1: context %.4f < adapter %.4f < oracle %.4f",
              r.context, full, r.oracle)};
}

// Shared by the ablation-ordering and zero-shot checks.
struct DefaultRuns {
  SynthResult synth;
  std::map<Ablation, Matrix> probs;
};

DefaultRuns default_runs() {
  DefaultRuns d{generate(SynthConfig{}), {}};
  const Bundle& b = d.synth.bundle;
  const LmHead head = LmHead::from_bundle(b);
  const Matrix z = widen(b.embeddings);
  for (Ablation ab : {Ablation::kFull, Ablation::kNoGate, Ablation::kNoSsl}) {
    AdapterConfig ac;
    ac.ablation = ab;
    const TrainResult tr = train(b, ac, TrainConfig{});
    const Graph g = training_graph(b, ac, true);
    d.probs.emplace(ab, build_feature_matrix({tr.adapter, head, z, g}, b, 0));
  }
  return d;
}

Outcome ablation_ordering(const DefaultRuns& d) {
  std::map<Ablation, double> acc;
  for (const auto& [ab, y] : d.probs) {
    const FeatureMatrix f = filter_std(y, 100);
    acc[ab] = run_protocol(f.values, d.synth.bundle.graph, d.synth.truth.topics, FewShotConfig{})
                  .mean;
  }
  const double full = acc[Ablation::kFull], ng = acc[Ablation::kNoGate],
               ns = acc[Ablation::kNoSsl];
  return {full >= ng && full >= ns && full - ns >= 0.02,
          fmt("5x5 mlp 10-shot accuracy: full %.4f, no_gate %.4f, no_ssl %.4f (full - no_ssl "
              "%.1f pts, need >= 2)",
              full, ng, ns, 100 * (full - ns))};
}

Outcome zero_shot(const DefaultRuns& d) {
  const Matrix& y = d.probs.at(Ablation::kFull);
  const SynthTruth& t = d.synth.truth;
  double planted_min = 1.0;
  std::string per;
  for (int c = 0; c < 4; ++c) {
    VocabSet vs{"topic" + std::to_string(c), t.topic_tokens(c), {}};
    for (int o = 0; o < 4; ++o) {
      if (o == c) continue;
      for (TokenId k : t.topic_tokens(o)) vs.negative.push_back(k);
    }
    std::vector<int> lab;
    for (int topic : t.topics) lab.push_back(topic == c);
    const double a = auc(zero_shot_scores(y, vs), lab);
    planted_min = std::min(planted_min, a);
    per += fmt("%s%.3f", c ? "/" : "", a);
  }

  // Random sets shaped like the planted ones: 20 positives, 60 negatives.
  std::mt19937_64 rng(99);
  std::vector<TokenId> ids(y.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<TokenId>(k);
  std::uniform_int_distribution<int> topic(0, 3);
  double sum = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    std::shuffle(ids.begin(), ids.end(), rng);
    const VocabSet vs{"random", {ids.begin(), ids.begin() + 20}, {ids.begin() + 20, ids.begin() + 80}};
    const int c = topic(rng);
    std::vector<int> lab;
    for (int tp : t.topics) lab.push_back(tp == c);
    sum += auc(zero_shot_scores(y, vs), lab);
  }
  const double random_mean = sum / 20.0;
  return {planted_min >= 0.85 && random_mean >= 0.45 && random_mean <= 0.55,
          fmt("planted per-topic AUC %s (min %.3f, need >= 0.85); random sets mean AUC %.3f over "
              "20 draws (need [0.45, 0.55])",
              per.c_str(), planted_min, random_mean)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(2, 100), rows(2, 50), cols(1, 200);
  std::uniform_int_distribution<int> coarse(0, 5), bit(0, 1), grid(0, 4), pow2(2, 5);
  std::size_t auc_bad = 0, filt_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(rng);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? coarse(rng) * 0.1 : std::generate_canonical<double, 53>(rng);
      l[i] = bit(rng);
    }
    l[0] = 1;
    l[1] = 0;
    auc_bad += auc(s, l) != oracle::auc(s, l);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 1;
    const std::size_t r = ties ? (std::size_t{1} << pow2(rng)) : rows(rng);
    const std::size_t c = cols(rng);
    Matrix x(r, c);
    for (double& v : x.values()) {
      v = ties ? grid(rng) / 4.0 : std::generate_canonical<double, 53>(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(1, c);
    const std::size_t m = pick(rng);
    std::vector<std::uint32_t> got;
    for (TokenId k : filter_std(x, m).selected_tokens) got.push_back(k);
    filt_bad += got != oracle::filter_std(x, m);
  }
  return {auc_bad == 0 && filt_bad == 0,
          fmt("auc mismatches %zu/1000 (<= 100 points, ties included); filter_std mismatches "
              "%zu/100 matrices (half with exact ties)",
              auc_bad, filt_bad)};
}

std::uint64_t file_hash(const fs::path& p) {
  const auto bytes = read_file(p);
  return fnv1a(bytes);
}

Outcome determinism(const fs::path& scratch) {
  const fs::path dir = scratch / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "run.json").string();
  std::ofstream(cfg) << R"({"seed": 11,
    "synth": {"num_nodes": 120, "p_in": 0.15, "p_out": 0.01, "hidden_dim": 24, "embedding_dim": 8},
    "adapter": {"gate_dim": 8, "mlp_hidden": 16},
    "train": {"epochs": 5},
    "features": {"filter": "std:40"},
    "fewshot": {"shots_per_class": 5, "partitions": 2, "repeats": 2, "epochs": 40},
    "interpret": {"positive_class": 1}})";
  const std::string out = dir.string();
  const std::string bundle = (dir / "bundle.gpb").string();
  const std::string adapter = (dir / "adapter.gpa").string();
  const std::string features = (dir / "features.gpf").string();
  const std::string labels = (dir / "truth.json").string();
  const std::string vocab = (dir / "vocab_sets.json").string();

  struct Command {
    std::vector<std::string> args;
    std::vector<std::string> artifacts;
  };
  const std::vector<Command> commands{
      {{"gen-synth"}, {"bundle.gpb", "truth.json", "vocab_sets.json"}},
      {{"train-adapter", "--bundle", bundle}, {"adapter.gpa", "train.json"}},
      {{"extract-features", "--bundle", bundle, "--adapter", adapter},
       {"features.gpf", "features.csv", "features.json"}},
      {{"zero-shot", "--bundle", bundle, "--adapter", adapter, "--labels", labels, "--vocab", vocab},
       {"zero_shot.json"}},
      {{"few-shot", "--features", features, "--labels", labels}, {"few_shot.json"}},
      {{"interpret", "--bundle", bundle, "--features", features, "--labels", labels},
       {"interpret.json"}},
      {{"grad-check"}, {"grad_check.json"}},
  };
  std::size_t compared = 0, differing = 0, failed = 0;
  std::string notes;
  for (const Command& cmd : commands) {
    std::vector<std::string> args{"gprompt"};
    args.insert(args.end(), cmd.args.begin(), cmd.args.end());
    args.insert(args.end(), {"--config", cfg, "--out", out});
    std::vector<std::uint64_t> first;
    for (int pass = 0; pass < 2; ++pass) {
      std::ostringstream so, se;
      if (cli::run(args, so, se) != 0) {
        ++failed;
        notes += " " + cmd.args[0] + " failed: " + se.str();
        break;
      }
      for (std::size_t k = 0; k < cmd.artifacts.size(); ++k) {
        const std::uint64_t h = file_hash(dir / cmd.artifacts[k]);
        if (pass == 0) {
          first.push_back(h);
        } else {
          ++compared;
          if (h != first[k]) {
            ++differing;
            notes += " " + cmd.artifacts[k];
          }
        }
      }
    }
  }
  return {failed == 0 && differing == 0 && compared == 12,
          fmt("7 commands run twice, %zu artifact checksums compared, %zu differ, %zu failed%s",
              compared, differing, failed, notes.c_str())};
}

Outcome pooling_identity() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> count(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const GraphAdapter a = random_adapter(small_adapter(Ablation::kNoGate), 4, 6, rng);
    const LmHead head(oracle::random_matrix(12, 6, rng, 2.0), oracle::random_vector(12, rng));
    const Vector h = oracle::random_vector(6, rng);
    const Vector zi = oracle::random_vector(4, rng);
    const int n = count(rng);
    Vector mean_logits(12, 0.0), mean_fused(6, 0.0);
    for (int j = 0; j < n; ++j) {
      const Vector zj = oracle::random_vector(4, rng);
      const Vector f = a.fuse(h, zi, zj);
      const Vector l = head.logits(f);
      for (std::size_t t = 0; t < 12; ++t) mean_logits[t] += l[t] / n;
      for (std::size_t t = 0; t < 6; ++t) mean_fused[t] += f[t] / n;
    }
    const Vector p = softmax(mean_logits), q = head.predict(mean_fused);
    for (std::size_t t = 0; t < 12; ++t) worst = std::max(worst, std::abs(p[t] - q[t]));
  }
  return {worst <= 1e-9,
          fmt("softmax(mean logits) vs softmax(logits of mean fused state), equal gates: max "
              "abs diff %.2e over 100 cases (need <= 1e-9)",
              worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "gprompt_acceptance";
  fs::create_directories(scratch);

  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-22s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
                since(t0));
    std::fflush(stdout);
  };

  report("gradient-fidelity", gradient_fidelity);
  report("am-gm-loss", am_gm);
  report("graph-information-gain", graph_gain);
  std::optional<DefaultRuns> runs;
  report("ablation-ordering", [&] {
    runs = default_runs();
    return ablation_ordering(*runs);
  });
  report("zero-shot", [&] {
    if (!runs) return Outcome{false, "default runs unavailable"};
    return zero_shot(*runs);
  });
  report("oracle-equivalence", oracle_equivalence);
  report("determinism", [&] { return determinism(scratch); });
  report("pooling-identity", pooling_identity);
  report("lambda0-envelope", context_envelope);

  std::printf("%d of 9 checks failed\n", failures);
  return failures == 0 ? 0 : 1;
}
