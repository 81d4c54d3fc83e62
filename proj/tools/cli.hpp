// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// The gprompt command-line surface. Every subcommand reads one JSON run
// configuration (unknown keys rejected), applies flag overrides, and writes
// its artifacts plus a JSON record that echoes the resolved configuration.

#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gprompt/adapter.hpp"
#include "gprompt/eval.hpp"
#include "gprompt/synthetic.hpp"
#include "json.hpp"

namespace gprompt::cli {

using nlohmann::json;

struct FeatureSettings {
  std::uint32_t prompt_id = 0;
  std::string filter = "none";  // none | std:M | vocab:PATH
  Pooling pooling = Pooling::kArithmetic;
};

struct InterpretSettings {
  std::size_t top_k = 7;
  int positive_class = -1;  // one-vs-rest target for multi-class labels
};

// Without a bundle, grad-check runs on `instances` tiny synthetic bundles
// (seeds seed, seed+1, ...) with a gate_dim 4 / mlp_hidden 5 adapter.
struct GradCheckSettings {
  std::size_t instances = 5;
  std::size_t records = 4;
  double eps = 1e-5;
  std::size_t max_per_tensor = 0;  // 0 probes every coordinate
  double perturb = 0.1;            // std of the noise added to the initialisation
  double tolerance = 1e-6;
};

struct Paths {
  std::string bundle;
  std::string adapter;
  std::string features;
  std::string labels;
  std::string vocab;
  std::string out = ".";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = GPROMPT_THREADS / hardware
  SynthConfig synth;
  AdapterConfig adapter;
  TrainConfig train;
  FeatureSettings features;
  FewShotConfig fewshot;
  InterpretSettings interpret;
  GradCheckSettings grad_check;
  Paths paths;

  /// Pushes the shared seed and thread count into the module configs.
  void resolve();
};

RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
json to_json(const RunConfig& cfg);

/// Labels file: a JSON array of non-negative ints, or an object holding one
/// under "labels".
std::vector<int> load_labels(const std::filesystem::path& path);

/// Vocab-set file: one {label, positive, negative} object or an array of
/// them; entries are token strings or ids.
std::vector<VocabSet> load_vocab_sets(const std::filesystem::path& path, const Bundle* bundle,
                                      std::size_t vocab_size);

/// Process exit code for an exception escaping a command.
int exit_code(const std::exception& e);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidArgument = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitValidation = 4;
inline constexpr int kExitIo = 5;
inline constexpr int kExitNotFound = 6;
inline constexpr int kExitNumerical = 7;
inline constexpr int kExitEmptyNeighborhood = 8;

/// Runs the CLI with `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gprompt::cli
