// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include "CLI11.hpp"
#include "gprompt/features.hpp"
#include "gprompt/lm_head.hpp"
#include "gprompt/parallel.hpp"

namespace gprompt::cli {

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidArgument("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& dst) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      dst = it->get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument("config: " + path(key) + ": " + e.what());
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const char* key, Enum& dst, Parse parse) {
    std::string text;
    get(key, text);
    if (seen_.count(key)) dst = parse(text);
  }

  const json* child(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw InvalidArgument("config: unknown key '" + path(item.key()) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_synth(const json& j, SynthConfig& c) {
  Section s(j, "synth");
  s.get("num_nodes", c.num_nodes);
  s.get("num_topics", c.num_topics);
  s.get("vocab_size", c.vocab_size);
  s.get("tokens_per_topic", c.tokens_per_topic);
  s.get("common_tokens", c.common_tokens);
  s.get("p_in", c.p_in);
  s.get("p_out", c.p_out);
  s.get("context_weight", c.context_weight);
  s.get("topic_signal", c.topic_signal);
  s.get("embedding_noise", c.embedding_noise);
  s.get("hidden_noise", c.hidden_noise);
  s.get("head_scale", c.head_scale);
  s.get("hidden_scale", c.hidden_scale);
  s.get("masks_per_node", c.masks_per_node);
  s.get("prompts_per_node", c.prompts_per_node);
  s.get("hidden_dim", c.hidden_dim);
  s.get("embedding_dim", c.embedding_dim);
  s.finish();
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

void read_adapter(const json& j, AdapterConfig& c) {
  Section s(j, "adapter");
  s.get("gate_dim", c.gate_dim);
  s.get("mlp_depth", c.mlp_depth);
  s.get("mlp_hidden", c.mlp_hidden);
  s.get_enum("activation", c.activation, parse_activation);
  s.get_enum("ablation", c.ablation, parse_ablation);
  s.finish();
}

void read_train(const json& j, TrainConfig& c) {
  Section s(j, "train");
  s.get("epochs", c.epochs);
  s.get("batch_pairs", c.batch_pairs);
  s.get("sample_k", c.sample_k);
  s.get("mask_ratio", c.mask_ratio);
  s.get("lr", c.lr);
  s.get("weight_decay", c.weight_decay);
  s.get("warmup_fraction", c.warmup_fraction);
  s.get_enum("precision", c.precision, parse_precision);
  s.get("self_loops", c.self_loops);
  s.finish();
}

void read_features(const json& j, FeatureSettings& c) {
  Section s(j, "features");
  s.get("prompt_id", c.prompt_id);
  s.get("filter", c.filter);
  s.get_enum("pooling", c.pooling, parse_pooling);
  s.finish();
}

void read_fewshot(const json& j, FewShotConfig& c) {
  Section s(j, "fewshot");
  s.get("shots_per_class", c.shots_per_class);
  s.get("partitions", c.partitions);
  s.get("repeats", c.repeats);
  s.get("test_fraction", c.test_fraction);
  s.get_enum("classifier", c.classifier, parse_classifier);
  s.get("layers", c.layers);
  s.get("hidden", c.hidden);
  s.get("lr", c.lr);
  s.get("weight_decay", c.weight_decay);
  s.get("epochs", c.epochs);
  s.get("standardize", c.standardize);
  s.finish();
}

void read_interpret(const json& j, InterpretSettings& c) {
  Section s(j, "interpret");
  s.get("top_k", c.top_k);
  s.get("positive_class", c.positive_class);
  s.finish();
}

void read_grad_check(const json& j, GradCheckSettings& c) {
  Section s(j, "grad_check");
  s.get("instances", c.instances);
  s.get("records", c.records);
  s.get("eps", c.eps);
  s.get("max_per_tensor", c.max_per_tensor);
  s.get("perturb", c.perturb);
  s.get("tolerance", c.tolerance);
  s.finish();
}

void read_paths(const json& j, Paths& c) {
  Section s(j, "paths");
  s.get("bundle", c.bundle);
  s.get("adapter", c.adapter);
  s.get("features", c.features);
  s.get("labels", c.labels);
  s.get("vocab", c.vocab);
  s.get("out", c.out);
  s.finish();
}

}  // namespace

void RunConfig::resolve() {
  synth.seed = seed;
  train.seed = seed;
  fewshot.seed = seed;
  const std::size_t workers = worker_count(threads);
  train.threads = workers;
  fewshot.threads = workers;
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Section s(j, "");
  s.get("seed", c.seed);
  s.get("threads", c.threads);
  if (const json* v = s.child("synth")) read_synth(*v, c.synth);
  if (const json* v = s.child("adapter")) read_adapter(*v, c.adapter);
  if (const json* v = s.child("train")) read_train(*v, c.train);
  if (const json* v = s.child("features")) read_features(*v, c.features);
  if (const json* v = s.child("fewshot")) read_fewshot(*v, c.fewshot);
  if (const json* v = s.child("interpret")) read_interpret(*v, c.interpret);
  if (const json* v = s.child("grad_check")) read_grad_check(*v, c.grad_check);
  if (const json* v = s.child("paths")) read_paths(*v, c.paths);
  s.finish();
  return c;
}

namespace {

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("parse error in '" + path.string() + "': " + e.what());
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(parse_json_file(path));
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  const SynthConfig& s = c.synth;
  j["synth"] = {{"num_nodes", s.num_nodes},
                {"num_topics", s.num_topics},
                {"vocab_size", s.vocab_size},
                {"tokens_per_topic", s.tokens_per_topic},
                {"common_tokens", s.common_tokens},
                {"p_in", s.p_in},
                {"p_out", s.p_out},
                {"context_weight", s.context_weight},
                {"topic_signal", s.topic_signal},
                {"embedding_noise", s.embedding_noise},
                {"hidden_noise", s.hidden_noise},
                {"head_scale", s.head_scale},
                {"hidden_scale", s.hidden_scale},
                {"masks_per_node", s.masks_per_node},
                {"prompts_per_node", s.prompts_per_node},
                {"hidden_dim", s.hidden_dim},
                {"embedding_dim", s.embedding_dim}};
  const AdapterConfig& a = c.adapter;
  j["adapter"] = {{"gate_dim", a.gate_dim},
                  {"mlp_depth", a.mlp_depth},
                  {"mlp_hidden", a.mlp_hidden},
                  {"activation", "relu"},
                  {"ablation", to_string(a.ablation)}};
  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_pairs", t.batch_pairs},
                {"sample_k", t.sample_k},
                {"mask_ratio", t.mask_ratio},
                {"lr", t.lr},
                {"weight_decay", t.weight_decay},
                {"warmup_fraction", t.warmup_fraction},
                {"precision", to_string(t.precision)},
                {"self_loops", t.self_loops}};
  j["features"] = {{"prompt_id", c.features.prompt_id},
                   {"filter", c.features.filter},
                   {"pooling", to_string(c.features.pooling)}};
  const FewShotConfig& f = c.fewshot;
  j["fewshot"] = {{"shots_per_class", f.shots_per_class},
                  {"partitions", f.partitions},
                  {"repeats", f.repeats},
                  {"test_fraction", f.test_fraction},
                  {"classifier", to_string(f.classifier)},
                  {"layers", f.layers},
                  {"hidden", f.hidden},
                  {"lr", f.lr},
                  {"weight_decay", f.weight_decay},
                  {"epochs", f.epochs},
                  {"standardize", f.standardize}};
  j["interpret"] = {{"top_k", c.interpret.top_k},
                    {"positive_class", c.interpret.positive_class}};
  const GradCheckSettings& g = c.grad_check;
  j["grad_check"] = {{"instances", g.instances},
                     {"records", g.records},
                     {"eps", g.eps},
                     {"max_per_tensor", g.max_per_tensor},
                     {"perturb", g.perturb},
                     {"tolerance", g.tolerance}};
  j["paths"] = {{"bundle", c.paths.bundle},   {"adapter", c.paths.adapter},
                {"features", c.paths.features}, {"labels", c.paths.labels},
                {"vocab", c.paths.vocab},     {"out", c.paths.out}};
  return j;
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  json j = parse_json_file(path);
  if (j.is_object()) {
    if (!j.contains("labels")) throw InvalidArgument("labels file has no 'labels' field");
    j = j["labels"];
  }
  if (!j.is_array()) throw InvalidArgument("labels must be a JSON array");
  std::vector<int> out;
  for (const json& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw InvalidArgument("labels must be non-negative integers");
    }
    out.push_back(v.get<int>());
  }
  return out;
}

namespace {

std::vector<std::string> token_entries(const json& list, const std::string& what) {
  if (!list.is_array()) throw InvalidArgument(what + " must be an array");
  std::vector<std::string> out;
  for (const json& v : list) {
    if (v.is_string()) {
      out.push_back(v.get<std::string>());
    } else if (v.is_number_unsigned()) {
      out.push_back(std::to_string(v.get<std::uint64_t>()));
    } else {
      throw InvalidArgument(what + ": entries must be token strings or ids");
    }
  }
  return out;
}

}  // namespace

std::vector<VocabSet> load_vocab_sets(const std::filesystem::path& path, const Bundle* bundle,
                                      std::size_t vocab_size) {
  json j = parse_json_file(path);
  if (j.is_object()) j = json::array({j});
  if (!j.is_array() || j.empty()) throw InvalidArgument("vocab sets must be a nonempty array");
  std::vector<VocabSet> sets;
  for (const json& item : j) {
    Section s(item, "vocab_set");
    VocabSet v;
    s.get("label", v.label);
    const json* pos = s.child("positive");
    const json* neg = s.child("negative");
    s.finish();
    if (!pos || !neg) throw InvalidArgument("vocab set needs 'positive' and 'negative'");
    const auto p = token_entries(*pos, "positive");
    const auto n = token_entries(*neg, "negative");
    v.positive = resolve_tokens(bundle, p, vocab_size);
    v.negative = resolve_tokens(bundle, n, vocab_size);
    v.validate(vocab_size);
    sets.push_back(std::move(v));
  }
  return sets;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitInvalidArgument;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const NotFound*>(&e)) return kExitNotFound;
  if (dynamic_cast<const NumericalFailure*>(&e)) return kExitNumerical;
  if (dynamic_cast<const EmptyNeighborhood*>(&e)) return kExitEmptyNeighborhood;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitIo;
  return kExitFailure;
}

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, ablation, filter, pooling;
  std::optional<std::string> bundle, adapter, features, labels, vocab;
  std::optional<std::uint32_t> prompt_id;
  std::optional<std::size_t> top_k;
  std::optional<int> positive_class;
};

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.paths.out = *o.out;
  if (o.ablation) c.adapter.ablation = parse_ablation(*o.ablation);
  if (o.filter) c.features.filter = *o.filter;
  if (o.pooling) c.features.pooling = parse_pooling(*o.pooling);
  if (o.bundle) c.paths.bundle = *o.bundle;
  if (o.adapter) c.paths.adapter = *o.adapter;
  if (o.features) c.paths.features = *o.features;
  if (o.labels) c.paths.labels = *o.labels;
  if (o.vocab) c.paths.vocab = *o.vocab;
  if (o.prompt_id) c.features.prompt_id = *o.prompt_id;
  if (o.top_k) c.interpret.top_k = *o.top_k;
  if (o.positive_class) c.interpret.positive_class = *o.positive_class;
  c.resolve();
  return c;
}

std::filesystem::path out_path(const RunConfig& c, const char* name) {
  std::filesystem::create_directories(c.paths.out);
  return std::filesystem::path(c.paths.out) / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

const std::string& require_path(const std::string& p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string("missing input path: ") + what);
  return p;
}

Bundle load_input_bundle(const RunConfig& c) {
  return load_bundle(require_path(c.paths.bundle, "bundle (--bundle)"));
}

// Adapter from disk; sizes come from the file, the ablation from the config.
GraphAdapter load_input_adapter(const RunConfig& c, const Bundle& bundle) {
  AdapterFile file = load_adapter(require_path(c.paths.adapter, "adapter (--adapter)"));
  if (file.params.embedding_dim() != bundle.embedding_dim() ||
      file.params.hidden_dim() != bundle.hidden_dim()) {
    throw ValidationError("adapter dimensions do not match the bundle");
  }
  AdapterConfig cfg = c.adapter;
  cfg.gate_dim = file.params.gate_dim();
  cfg.mlp_depth = file.mlp_depth;
  cfg.mlp_hidden = file.mlp_hidden;
  return GraphAdapter(std::move(file.params), cfg);
}

Matrix prompt_distributions(const RunConfig& c, const Bundle& bundle) {
  if (c.features.pooling != Pooling::kArithmetic) {
    throw InvalidArgument("feature extraction supports arithmetic pooling only");
  }
  const GraphAdapter adapter = load_input_adapter(c, bundle);
  const LmHead head = LmHead::from_bundle(bundle);
  const Matrix z = widen(bundle.embeddings);
  const Graph graph = training_graph(bundle, adapter.config(), c.train.self_loops);
  const InferenceContext ctx{adapter, head, z, graph};
  return build_feature_matrix(ctx, bundle, c.features.prompt_id, c.train.threads);
}

FeatureMatrix apply_filter(const RunConfig& c, const Matrix& probs, const Bundle& bundle) {
  const std::string& filter = c.features.filter;
  if (filter == "none") {
    std::vector<TokenId> all(probs.cols());
    for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<TokenId>(t);
    return filter_vocab(probs, all);
  }
  if (filter.rfind("std:", 0) == 0) {
    std::size_t m = 0;
    try {
      std::size_t used = 0;
      m = std::stoul(filter.substr(4), &used);
      if (used != filter.size() - 4) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InvalidArgument("bad filter '" + filter + "': expected std:M");
    }
    return filter_std(probs, m);
  }
  if (filter.rfind("vocab:", 0) == 0) {
    const json j = parse_json_file(filter.substr(6));
    const json& list = j.is_object() && j.contains("tokens") ? j["tokens"] : j;
    const auto entries = token_entries(list, "vocab filter");
    return filter_vocab(probs, resolve_tokens(&bundle, entries, probs.cols()));
  }
  throw InvalidArgument("bad filter '" + filter + "': expected none, std:M or vocab:PATH");
}

json report_json(const MetricsReport& r) {
  return {{"metric", r.metric}, {"values", r.values}, {"mean", r.mean}, {"std", r.std}};
}

std::string token_name(const Bundle* bundle, TokenId t) {
  if (bundle && bundle->token_strings) return (*bundle->token_strings)[t];
  return std::to_string(t);
}

// ---------------------------------------------------------------------------

void cmd_gen_synth(const RunConfig& c, std::ostream& out) {
  const SynthResult r = generate(c.synth);
  const auto bundle_path = out_path(c, "bundle.gpb");
  save_bundle(r.bundle, bundle_path);
  load_bundle(bundle_path);

  json topic_tokens = json::array();
  std::vector<std::vector<std::string>> names(c.synth.num_topics);
  for (std::size_t topic = 0; topic < c.synth.num_topics; ++topic) {
    for (TokenId t : r.truth.topic_tokens(static_cast<int>(topic))) {
      names[topic].push_back((*r.bundle.token_strings)[t]);
    }
    topic_tokens.push_back(names[topic]);
  }
  json truth = {{"labels", r.truth.topics},
                {"num_topics", c.synth.num_topics},
                {"topic_tokens", topic_tokens},
                {"config", to_json(c)}};
  write_json(out_path(c, "truth.json"), truth);

  json sets = json::array();
  for (std::size_t topic = 0; topic < names.size(); ++topic) {
    std::vector<std::string> neg;
    for (std::size_t other = 0; other < names.size(); ++other) {
      if (other != topic) neg.insert(neg.end(), names[other].begin(), names[other].end());
    }
    sets.push_back({{"label", "topic" + std::to_string(topic)},
                    {"positive", names[topic]},
                    {"negative", neg}});
  }
  write_json(out_path(c, "vocab_sets.json"), sets);
  out << "wrote " << bundle_path.string() << " (" << r.bundle.num_nodes() << " nodes, "
      << r.bundle.masked.size() << " masked records)\n";
}

void cmd_train_adapter(const RunConfig& c, std::ostream& out) {
  const Bundle bundle = load_input_bundle(c);
  const TrainResult r = train(bundle, c.adapter, c.train, [&](const EpochStats& s) {
    out << json{{"epoch", s.epoch}, {"mean_loss", s.mean_loss}, {"seconds", s.seconds}}.dump()
        << "\n";
  });
  save_adapter(r.adapter.params(), c.adapter.mlp_hidden, out_path(c, "adapter.gpa"));
  json epochs = json::array();
  for (const EpochStats& s : r.history.epochs) {
    epochs.push_back({{"epoch", s.epoch}, {"mean_loss", s.mean_loss}});
  }
  write_json(out_path(c, "train.json"),
             {{"epochs", epochs}, {"steps", r.history.steps}, {"config", to_json(c)}});
}

void cmd_extract_features(const RunConfig& c, std::ostream& out) {
  const Bundle bundle = load_input_bundle(c);
  const Matrix probs = prompt_distributions(c, bundle);
  const FeatureMatrix f = apply_filter(c, probs, bundle);
  save_features(f, out_path(c, "features.gpf"));
  write_text(out_path(c, "features.csv"), features_csv(f, bundle.token_strings));
  json tokens = json::array();
  for (TokenId t : f.selected_tokens) tokens.push_back(token_name(&bundle, t));
  write_json(out_path(c, "features.json"),
             {{"rows", f.values.rows()},
              {"columns", f.values.cols()},
              {"selected_tokens", tokens},
              {"config", to_json(c)}});
  out << "wrote " << f.values.rows() << " x " << f.values.cols() << " features\n";
}

// Features plus the vocabulary id of each column, from a GPF1 file or
// computed from bundle + adapter.
struct Columns {
  Matrix values;
  std::vector<TokenId> tokens;
};

Columns load_columns(const RunConfig& c, const Bundle* bundle) {
  if (!c.paths.features.empty()) {
    FeatureMatrix f = load_features(c.paths.features);
    return {std::move(f.values), std::move(f.selected_tokens)};
  }
  if (!bundle) throw InvalidArgument("need --features, or --bundle with --adapter");
  Columns out{prompt_distributions(c, *bundle), {}};
  for (std::size_t t = 0; t < out.values.cols(); ++t) out.tokens.push_back(static_cast<TokenId>(t));
  return out;
}

std::optional<Bundle> optional_bundle(const RunConfig& c) {
  if (c.paths.bundle.empty()) return std::nullopt;
  return load_bundle(c.paths.bundle);
}

std::vector<int> load_input_labels(const RunConfig& c, std::size_t rows) {
  std::vector<int> labels = load_labels(require_path(c.paths.labels, "labels (--labels)"));
  if (labels.size() != rows) {
    throw InvalidArgument("labels: " + std::to_string(labels.size()) + " entries for " +
                          std::to_string(rows) + " nodes");
  }
  if (num_classes(labels) < 2) throw InvalidArgument("labels must contain at least two classes");
  return labels;
}

void cmd_zero_shot(const RunConfig& c, std::ostream& out) {
  const std::optional<Bundle> bundle = optional_bundle(c);
  const Bundle* b = bundle ? &*bundle : nullptr;
  const Columns cols = load_columns(c, b);
  const std::vector<int> labels = load_input_labels(c, cols.values.rows());
  const std::size_t vocab = b ? b->vocab_size()
                              : *std::max_element(cols.tokens.begin(), cols.tokens.end()) + 1;
  std::vector<VocabSet> sets =
      load_vocab_sets(require_path(c.paths.vocab, "vocab sets (--vocab)"), b, vocab);

  std::map<TokenId, TokenId> column_of;
  for (std::size_t k = 0; k < cols.tokens.size(); ++k) {
    column_of[cols.tokens[k]] = static_cast<TokenId>(k);
  }
  auto to_columns = [&](std::vector<TokenId>& ids, const std::string& label) {
    for (TokenId& t : ids) {
      const auto it = column_of.find(t);
      if (it == column_of.end()) {
        throw InvalidArgument("vocab set '" + label + "': token " + token_name(b, t) +
                              " is not a feature column");
      }
      t = it->second;
    }
  };
  for (VocabSet& s : sets) {
    to_columns(s.positive, s.label);
    to_columns(s.negative, s.label);
  }

  const std::size_t classes = num_classes(labels);
  json result;
  std::vector<double> aucs;
  json per_set = json::array();
  if (classes == 2 && sets.size() == 1) {
    aucs.push_back(auc(zero_shot_scores(cols.values, sets[0]), labels));
    per_set.push_back({{"label", sets[0].label}, {"auc", aucs.back()}});
  } else {
    if (sets.size() != classes) {
      throw InvalidArgument("zero-shot: " + std::to_string(sets.size()) + " vocab sets for " +
                            std::to_string(classes) + " classes");
    }
    for (std::size_t k = 0; k < sets.size(); ++k) {
      std::vector<int> binary(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        binary[i] = labels[i] == static_cast<int>(k) ? 1 : 0;
      }
      aucs.push_back(auc(zero_shot_scores(cols.values, sets[k]), binary));
      per_set.push_back({{"label", sets[k].label}, {"auc", aucs.back()}});
    }
    const std::vector<int> pred = zero_shot_predict(cols.values, sets);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
    result["accuracy"] = static_cast<double>(hit) / static_cast<double>(pred.size());
  }
  const MetricsReport report = MetricsReport::from_values("auc", aucs);
  json j = report_json(report);
  j.update(result);
  j["sets"] = per_set;
  j["config"] = to_json(c);
  write_json(out_path(c, "zero_shot.json"), j);
  out << "zero-shot auc " << report.mean << "\n";
}

void cmd_few_shot(const RunConfig& c, std::ostream& out) {
  const FeatureMatrix f = load_features(require_path(c.paths.features, "features (--features)"));
  const std::optional<Bundle> bundle = optional_bundle(c);
  if (c.fewshot.classifier == ClassifierKind::kSage && !bundle) {
    throw InvalidArgument("the sage classifier needs the bundle graph (--bundle)");
  }
  const Graph graph = bundle ? bundle->graph : Graph();
  const std::vector<int> labels = load_input_labels(c, f.values.rows());
  const MetricsReport report = run_protocol(f.values, graph, labels, c.fewshot);
  json j = report_json(report);
  j["config"] = to_json(c);
  write_json(out_path(c, "few_shot.json"), j);
  out << report.metric << " " << report.mean << " +- " << report.std << "\n";
}

void cmd_interpret(const RunConfig& c, std::ostream& out) {
  const std::optional<Bundle> bundle = optional_bundle(c);
  const Bundle* b = bundle ? &*bundle : nullptr;
  const Columns cols = load_columns(c, b);
  std::vector<int> labels = load_input_labels(c, cols.values.rows());
  const int target = c.interpret.positive_class;
  if (target >= 0) {
    for (int& l : labels) l = l == target ? 1 : 0;
  } else if (num_classes(labels) != 2) {
    throw InvalidArgument("interpret: multi-class labels need --class");
  }
  const auto ranked = rank_tokens_by_auc(cols.values, labels, c.interpret.top_k, cols.tokens);
  json rows = json::array();
  out << "token\tauc\n";
  for (const TokenAuc& r : ranked) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", r.auc);
    out << token_name(b, r.token) << "\t" << buf << "\n";
    rows.push_back({{"token", token_name(b, r.token)}, {"id", r.token}, {"auc", r.auc}});
  }
  write_json(out_path(c, "interpret.json"), {{"rows", rows}, {"config", to_json(c)}});
}

void cmd_grad_check(const RunConfig& c, std::ostream& out) {
  const GradCheckSettings& g = c.grad_check;
  GradCheckOptions opts;
  opts.records = g.records;
  opts.sample_k = c.train.sample_k;
  opts.perturb = g.perturb;
  opts.eps = g.eps;
  opts.max_per_tensor = g.max_per_tensor;
  opts.self_loops = c.train.self_loops;

  json runs = json::array();
  GradCheckReport worst;
  auto record = [&](const GradCheckReport& rep, const std::string& source) {
    runs.push_back({{"source", source},
                    {"max_rel_error", rep.max_rel_error},
                    {"coordinates", rep.coordinates},
                    {"worst_tensor", rep.worst_tensor},
                    {"worst_index", rep.worst_index},
                    {"worst_analytic", rep.worst_analytic},
                    {"worst_numeric", rep.worst_numeric}});
    if (runs.size() == 1 || rep.max_rel_error > worst.max_rel_error) worst = rep;
  };
  std::size_t coordinates = 0;
  if (!c.paths.bundle.empty()) {
    opts.seed = c.seed;
    const GradCheckReport rep = check_bundle_gradients(load_input_bundle(c), c.adapter, opts);
    coordinates = rep.coordinates;
    record(rep, c.paths.bundle);
  } else {
    if (g.instances == 0) throw InvalidArgument("grad-check: instances must be > 0");
    AdapterConfig tiny = c.adapter;
    tiny.gate_dim = 4;
    tiny.mlp_hidden = 5;
    for (std::size_t k = 0; k < g.instances; ++k) {
      opts.seed = c.seed + k;
      const SynthResult s = generate(SynthConfig::tiny(opts.seed));
      const GradCheckReport rep = check_bundle_gradients(s.bundle, tiny, opts);
      coordinates += rep.coordinates;
      record(rep, "tiny-synthetic seed " + std::to_string(opts.seed));
    }
  }
  write_json(out_path(c, "grad_check.json"),
             {{"max_rel_error", worst.max_rel_error},
              {"coordinates", coordinates},
              {"runs", runs},
              {"config", to_json(c)}});
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", worst.max_rel_error);
  out << "max_rel_error " << buf << " over " << coordinates << " coordinates\n";
  if (!(worst.max_rel_error <= g.tolerance)) {
    throw NumericalFailure("gradient check exceeded tolerance " + std::to_string(g.tolerance));
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gprompt: graph-adapter training, prompt features and evaluation"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--ablation", o.ablation, "full | no_gate | no_graph | no_ssl");
    sub->add_option("--bundle", o.bundle, "Bundle file (GPB1)");
  };
  using Handler = void (*)(const RunConfig&, std::ostream&);
  std::vector<std::pair<CLI::App*, Handler>> commands;

  CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic bundle and truth sidecar");
  common(gen);
  commands.emplace_back(gen, cmd_gen_synth);

  CLI::App* tr = app.add_subcommand("train-adapter", "Train the graph adapter on a bundle");
  common(tr);
  commands.emplace_back(tr, cmd_train_adapter);

  CLI::App* ex = app.add_subcommand("extract-features", "Prompt features from a trained adapter");
  common(ex);
  ex->add_option("--adapter", o.adapter, "Adapter file (GPA1)");
  ex->add_option("--prompt-id", o.prompt_id, "Prompt id to extract");
  ex->add_option("--filter", o.filter, "none | std:M | vocab:PATH");
  ex->add_option("--pooling", o.pooling, "arithmetic");
  commands.emplace_back(ex, cmd_extract_features);

  CLI::App* zs = app.add_subcommand("zero-shot", "Vocabulary-set zero-shot scoring");
  common(zs);
  zs->add_option("--features", o.features, "Feature file (GPF1)");
  zs->add_option("--adapter", o.adapter, "Adapter file, when scoring from the bundle");
  zs->add_option("--prompt-id", o.prompt_id, "Prompt id, when scoring from the bundle");
  zs->add_option("--labels", o.labels, "Labels JSON");
  zs->add_option("--vocab", o.vocab, "Vocab sets JSON");
  commands.emplace_back(zs, cmd_zero_shot);

  CLI::App* fs = app.add_subcommand("few-shot", "Few-shot partitions x repeats protocol");
  common(fs);
  fs->add_option("--features", o.features, "Feature file (GPF1)");
  fs->add_option("--labels", o.labels, "Labels JSON");
  commands.emplace_back(fs, cmd_few_shot);

  CLI::App* in = app.add_subcommand("interpret", "Top-k tokens by per-column AUC");
  common(in);
  in->add_option("--features", o.features, "Feature file (GPF1)");
  in->add_option("--adapter", o.adapter, "Adapter file, when ranking from the bundle");
  in->add_option("--labels", o.labels, "Labels JSON");
  in->add_option("-k,--top-k", o.top_k, "Rows to print");
  in->add_option("--class", o.positive_class, "Positive class for multi-class labels");
  commands.emplace_back(in, cmd_interpret);

  CLI::App* gc = app.add_subcommand("grad-check", "Finite-difference check of adapter gradients");
  common(gc);
  commands.emplace_back(gc, cmd_grad_check);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidArgument;
  }

  try {
    const RunConfig cfg = resolve_config(o);
    for (const auto& [sub, handler] : commands) {
      if (sub->parsed()) handler(cfg, out);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  }
}

}  // namespace gprompt::cli
