// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "gprompt/parallel.hpp"

namespace gprompt {

namespace {

constexpr std::string_view kFeatureMagic = "GPF1";

void append_float(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char ch : text) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + '"';
}

}  // namespace

Vector infer_prompt_distribution(const InferenceContext& ctx, const PromptRecord& record) {
  if (record.node >= ctx.graph.num_nodes()) {
    throw InvalidArgument("prompt record node out of range");
  }
  const Vector hidden(record.hidden.begin(), record.hidden.end());
  return ctx.adapter.node_predict(ctx.head, hidden, ctx.embeddings.row(record.node),
                                  ctx.embeddings, ctx.graph.neighbors(record.node),
                                  Pooling::kArithmetic);
}

const PromptRecord& find_prompt(const Bundle& bundle, NodeId node, std::uint32_t prompt_id) {
  for (const auto& p : bundle.prompts) {
    if (p.node == node && p.prompt_id == prompt_id) return p;
  }
  throw NotFound("no prompt record for node " + std::to_string(node) + " prompt " +
                 std::to_string(prompt_id));
}

Matrix build_feature_matrix(const InferenceContext& ctx, const Bundle& bundle,
                            std::uint32_t prompt_id, std::size_t threads) {
  const std::size_t n = bundle.num_nodes();
  std::vector<const PromptRecord*> by_node(n, nullptr);
  for (const auto& p : bundle.prompts) {
    if (p.prompt_id == prompt_id && p.node < n) by_node[p.node] = &p;
  }
  std::string missing;
  std::size_t missing_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (by_node[i] != nullptr) continue;
    if (missing_count < 20) missing += (missing.empty() ? "" : ", ") + std::to_string(i);
    ++missing_count;
  }
  if (missing_count > 0) {
    throw NotFound(std::to_string(missing_count) + " node(s) lack prompt " +
                   std::to_string(prompt_id) + ": " + missing +
                   (missing_count > 20 ? ", ..." : ""));
  }

  Matrix y(n, ctx.head.vocab_size());
  parallel_for(n, worker_count(threads), [&](std::size_t i) {
    const Vector row = infer_prompt_distribution(ctx, *by_node[i]);
    std::copy(row.begin(), row.end(), y.row(i).begin());
  });
  return y;
}

FeatureMatrix filter_std(const Matrix& probs, std::size_t m) {
  const std::size_t t = probs.cols();
  if (m < 1 || m > t) {
    throw InvalidArgument("filter_std: M=" + std::to_string(m) + " outside [1, " +
                          std::to_string(t) + "]");
  }
  std::vector<double> sd(t, 0.0);
  std::vector<double> column(probs.rows());
  for (std::size_t c = 0; c < t; ++c) {
    for (std::size_t r = 0; r < probs.rows(); ++r) column[r] = probs(r, c);
    sd[c] = stddev(column);
  }
  std::vector<TokenId> order(t);
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return sd[a] > sd[b]; });
  order.resize(m);
  return {order, filter_vocab(probs, order).values};
}

FeatureMatrix filter_vocab(const Matrix& probs, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw InvalidArgument("filter_vocab: empty token selection");
  std::set<TokenId> seen;
  for (TokenId tok : tokens) {
    if (tok >= probs.cols()) {
      throw InvalidArgument("filter_vocab: unknown token id " + std::to_string(tok));
    }
    if (!seen.insert(tok).second) {
      throw InvalidArgument("filter_vocab: duplicate token id " + std::to_string(tok));
    }
  }
  FeatureMatrix out;
  out.selected_tokens.assign(tokens.begin(), tokens.end());
  out.values = Matrix(probs.rows(), tokens.size());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    for (std::size_t c = 0; c < tokens.size(); ++c) out.values(r, c) = probs(r, tokens[c]);
  }
  return out;
}

std::vector<TokenId> resolve_tokens(const Bundle* bundle, std::span<const std::string> entries,
                                    std::size_t vocab_size) {
  std::vector<TokenId> ids;
  for (const auto& e : entries) {
    if (bundle != nullptr) {
      if (auto id = bundle->find_token(e)) {
        ids.push_back(*id);
        continue;
      }
    }
    std::uint64_t v = 0;
    const auto res = std::from_chars(e.data(), e.data() + e.size(), v);
    if (res.ec != std::errc() || res.ptr != e.data() + e.size() || v >= vocab_size) {
      throw InvalidArgument("unknown token '" + e + "'");
    }
    ids.push_back(static_cast<TokenId>(v));
  }
  return ids;
}

std::vector<std::byte> serialize_features(const FeatureMatrix& f) {
  detail::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u64(f.values.rows());
  w.u32(static_cast<std::uint32_t>(f.selected_tokens.size()));
  w.u32s(f.selected_tokens);
  w.f32s(narrow(f.values).values());
  return w.take();
}

FeatureMatrix deserialize_features(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kFeatureMagic.size()) throw IoError("truncated file: missing magic");
  if (!r.magic(kFeatureMagic)) throw FormatError("bad magic: not a GPF1 feature file");
  const std::uint64_t n = r.u64();
  const std::uint32_t m = r.u32();
  FeatureMatrix f;
  r.need(m, 4);
  f.selected_tokens.resize(m);
  r.u32s(f.selected_tokens);
  r.need(n, 4ULL * m);
  MatrixF values(n, m);
  r.f32s(values.values());
  if (r.remaining() != 0) {
    throw FormatError("features: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  if (!all_finite(values.values())) throw ValidationError("features: non-finite value");
  f.values = widen(values);
  return f;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  write_file(path, serialize_features(features));
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  return deserialize_features(read_file(path));
}

std::string features_csv(const FeatureMatrix& f,
                         const std::optional<std::vector<std::string>>& token_strings) {
  std::string out = "node_id";
  for (TokenId tok : f.selected_tokens) {
    out += ',';
    if (token_strings && tok < token_strings->size()) {
      out += csv_field((*token_strings)[tok]);
    } else {
      out += std::to_string(tok);
    }
  }
  out += '\n';
  for (std::size_t r = 0; r < f.values.rows(); ++r) {
    out += std::to_string(r);
    for (std::size_t c = 0; c < f.values.cols(); ++c) {
      out += ',';
      append_float(out, static_cast<float>(f.values(r, c)));
    }
    out += '\n';
  }
  return out;
}

}  // namespace gprompt
