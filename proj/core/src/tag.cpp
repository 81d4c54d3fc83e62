// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gprompt/tag.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "binary_io.hpp"

namespace gprompt {

namespace {

constexpr std::string_view kBundleMagic = "GPB1";

[[noreturn]] void invalid(const std::string& what) { throw ValidationError(what); }

}  // namespace

Graph::Graph(std::vector<std::uint64_t> offsets, std::vector<NodeId> targets,
             bool undirected, bool self_loops_added)
    : offsets_(std::move(offsets)),
      targets_(std::move(targets)),
      undirected_(undirected),
      self_loops_added_(self_loops_added) {
  if (offsets_.empty()) offsets_.push_back(0);
}

Graph Graph::from_edges(std::size_t num_nodes,
                        std::span<const std::pair<NodeId, NodeId>> edges,
                        bool undirected) {
  std::vector<std::vector<NodeId>> adj(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw InvalidArgument("from_edges: endpoint out of range");
    }
    adj[u].push_back(v);
    if (undirected && u != v) adj[v].push_back(u);
  }
  std::vector<std::uint64_t> offsets{0};
  std::vector<NodeId> targets;
  bool all_self = num_nodes > 0;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (!std::binary_search(row.begin(), row.end(), i)) all_self = false;
    targets.insert(targets.end(), row.begin(), row.end());
    offsets.push_back(targets.size());
  }
  return Graph(std::move(offsets), std::move(targets), undirected, all_self);
}

std::span<const NodeId> Graph::neighbors(NodeId i) const {
  if (i >= num_nodes()) {
    throw InvalidArgument("neighbors: node " + std::to_string(i) + " out of range");
  }
  return {targets_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

void Graph::validate() const {
  const std::size_t n = num_nodes();
  if (offsets_.front() != 0) invalid("graph: offsets[0] must be 0");
  if (offsets_.back() != targets_.size()) invalid("graph: offsets[N] must equal E");
  for (std::size_t i = 0; i < n; ++i) {
    if (offsets_[i] > offsets_[i + 1]) invalid("graph: offsets not nondecreasing");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = neighbors(i);
    bool has_self = false;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] >= n) invalid("graph: target out of range in row " + std::to_string(i));
      if (k > 0 && row[k] <= row[k - 1]) {
        invalid("graph: row " + std::to_string(i) + " not sorted/unique");
      }
      has_self = has_self || row[k] == i;
    }
    if (self_loops_added_ && !has_self) {
      invalid("graph: self-loop flag set but node " + std::to_string(i) + " lacks one");
    }
  }
  if (undirected_) {
    for (std::size_t i = 0; i < n; ++i) {
      for (NodeId j : neighbors(i)) {
        const auto back = neighbors(j);
        if (!std::binary_search(back.begin(), back.end(), static_cast<NodeId>(i))) {
          invalid("graph: undirected flag set but edge " + std::to_string(i) + "->" +
                  std::to_string(j) + " has no reverse");
        }
      }
    }
  }
}

Graph add_self_loops(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint64_t> offsets{0};
  std::vector<NodeId> targets;
  targets.reserve(g.num_edges() + n);
  for (NodeId i = 0; i < n; ++i) {
    const auto row = g.neighbors(i);
    const auto pos = std::lower_bound(row.begin(), row.end(), i);
    targets.insert(targets.end(), row.begin(), pos);
    targets.push_back(i);
    targets.insert(targets.end(), (pos != row.end() && *pos == i) ? pos + 1 : pos,
                   row.end());
    offsets.push_back(targets.size());
  }
  return Graph(std::move(offsets), std::move(targets), g.undirected(), true);
}

Graph self_loop_graph(std::size_t num_nodes) {
  std::vector<std::uint64_t> offsets(num_nodes + 1);
  std::vector<NodeId> targets(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    offsets[i + 1] = i + 1;
    targets[i] = i;
  }
  return Graph(std::move(offsets), std::move(targets), true, true);
}

std::vector<NodeId> sample_neighbors(const Graph& g, NodeId i, std::size_t k,
                                     std::mt19937_64& rng) {
  const auto row = g.neighbors(i);
  if (row.empty()) {
    throw EmptyNeighborhood("node " + std::to_string(i) + " has no neighbours");
  }
  std::vector<NodeId> pool(row.begin(), row.end());
  const std::size_t take = std::min(k, pool.size());
  // Partial Fisher-Yates: the first `take` slots become the sample.
  for (std::size_t s = 0; s < take; ++s) {
    std::uniform_int_distribution<std::size_t> pick(s, pool.size() - 1);
    std::swap(pool[s], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

void Bundle::validate() const {
  const std::size_t t = vocab_size();
  const std::size_t d = hidden_dim();
  const std::size_t dz = embedding_dim();
  const std::size_t n = num_nodes();
  if (t == 0) invalid("bundle: vocabulary size is 0");
  if (d == 0) invalid("bundle: hidden dimension is 0");
  if (dz == 0) invalid("bundle: embedding dimension is 0");
  if (n == 0) invalid("bundle: graph has no nodes");
  if (head_bias.size() != t) {
    invalid("bundle: LM head has " + std::to_string(t) + " rows but bias has " +
            std::to_string(head_bias.size()) + " entries");
  }
  if (embeddings.rows() != n) {
    invalid("bundle: " + std::to_string(embeddings.rows()) + " embeddings for " +
            std::to_string(n) + " nodes");
  }
  if (!all_finite(head_weight.values()) || !all_finite(std::span<const float>(head_bias))) {
    invalid("bundle: non-finite LM head value");
  }
  if (!all_finite(embeddings.values())) invalid("bundle: non-finite embedding value");
  graph.validate();

  for (std::size_t r = 0; r < masked.size(); ++r) {
    const auto& m = masked[r];
    if (m.node >= n) invalid("bundle: masked record " + std::to_string(r) + " node out of range");
    if (m.token >= t) invalid("bundle: masked record " + std::to_string(r) + " token out of range");
    if (m.hidden.size() != d) invalid("bundle: masked record " + std::to_string(r) + " hidden dim");
    if (!all_finite(std::span<const float>(m.hidden))) {
      invalid("bundle: masked record " + std::to_string(r) + " non-finite hidden");
    }
  }
  std::set<std::pair<NodeId, std::uint32_t>> seen;
  for (std::size_t r = 0; r < prompts.size(); ++r) {
    const auto& p = prompts[r];
    if (p.node >= n) invalid("bundle: prompt record " + std::to_string(r) + " node out of range");
    if (p.hidden.size() != d) invalid("bundle: prompt record " + std::to_string(r) + " hidden dim");
    if (!all_finite(std::span<const float>(p.hidden))) {
      invalid("bundle: prompt record " + std::to_string(r) + " non-finite hidden");
    }
    if (!seen.emplace(p.node, p.prompt_id).second) {
      invalid("bundle: duplicate prompt record for node " + std::to_string(p.node) +
              " prompt " + std::to_string(p.prompt_id));
    }
  }
  if (token_strings && token_strings->size() != t) {
    invalid("bundle: " + std::to_string(token_strings->size()) + " token strings for T=" +
            std::to_string(t));
  }
}

std::optional<TokenId> Bundle::find_token(std::string_view text) const {
  if (!token_strings) return std::nullopt;
  const auto it = std::find(token_strings->begin(), token_strings->end(), text);
  if (it == token_strings->end()) return std::nullopt;
  return static_cast<TokenId>(std::distance(token_strings->begin(), it));
}

std::vector<std::byte> serialize_bundle(const Bundle& b) {
  detail::ByteWriter w;
  w.magic(kBundleMagic);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.vocab_size()));
  w.u32(static_cast<std::uint32_t>(b.hidden_dim()));
  w.u32(static_cast<std::uint32_t>(b.embedding_dim()));
  w.u64(b.num_nodes());
  w.u64(b.graph.num_edges());
  w.u8(b.graph.undirected() ? 1 : 0);
  w.u8(b.graph.self_loops_added() ? 1 : 0);
  w.f32s(b.head_weight.values());
  w.f32s(b.head_bias);
  w.f32s(b.embeddings.values());
  w.u64s(b.graph.offsets());
  w.u64s(b.graph.targets());
  w.u64(b.masked.size());
  for (const auto& m : b.masked) {
    w.u64(m.node);
    w.u32(m.position);
    w.u32(m.token);
    w.f32s(m.hidden);
  }
  w.u64(b.prompts.size());
  for (const auto& p : b.prompts) {
    w.u64(p.node);
    w.u32(p.prompt_id);
    w.f32s(p.hidden);
  }
  w.u8(b.token_strings ? 1 : 0);
  if (b.token_strings) {
    for (const auto& s : *b.token_strings) w.string(s);
  }
  return w.take();
}

Bundle deserialize_bundle(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kBundleMagic.size()) throw IoError("truncated file: missing magic");
  if (!r.magic(kBundleMagic)) throw FormatError("bad magic: not a GPB1 bundle");
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw FormatError("unsupported bundle version " + std::to_string(version));
  }
  const std::uint64_t t = r.u32();
  const std::uint64_t d = r.u32();
  const std::uint64_t dz = r.u32();
  const std::uint64_t n = r.u64();
  const std::uint64_t e = r.u64();
  const std::uint8_t undirected = r.u8();
  const std::uint8_t self_loops = r.u8();
  if (undirected > 1 || self_loops > 1) throw ValidationError("bundle: flag byte not 0/1");

  Bundle b;
  r.need(t, 4 * d);
  b.head_weight = MatrixF(t, d);
  r.f32s(b.head_weight.values());
  r.need(t, 4);
  b.head_bias.resize(t);
  r.f32s(b.head_bias);
  r.need(n, 4 * dz);
  b.embeddings = MatrixF(n, dz);
  r.f32s(b.embeddings.values());
  r.need(n + 1, 8);
  std::vector<std::uint64_t> offsets(n + 1);
  r.u64s(offsets);
  r.need(e, 8);
  std::vector<NodeId> targets(e);
  r.u64s(targets);
  b.graph = Graph(std::move(offsets), std::move(targets), undirected == 1, self_loops == 1);

  const std::uint64_t masked_count = r.u64();
  r.need(masked_count, 16 + 4 * d);
  b.masked.resize(masked_count);
  for (auto& m : b.masked) {
    m.node = r.u64();
    m.position = r.u32();
    m.token = r.u32();
    m.hidden.resize(d);
    r.f32s(m.hidden);
  }
  const std::uint64_t prompt_count = r.u64();
  r.need(prompt_count, 12 + 4 * d);
  b.prompts.resize(prompt_count);
  for (auto& p : b.prompts) {
    p.node = r.u64();
    p.prompt_id = r.u32();
    p.hidden.resize(d);
    r.f32s(p.hidden);
  }
  const std::uint8_t has_strings = r.u8();
  if (has_strings > 1) throw ValidationError("bundle: token-string flag not 0/1");
  if (has_strings == 1) {
    r.need(t, 4);
    std::vector<std::string> strings;
    strings.reserve(t);
    for (std::uint64_t k = 0; k < t; ++k) strings.push_back(r.string());
    b.token_strings = std::move(strings);
  }
  if (r.remaining() != 0) {
    throw FormatError("bundle: " + std::to_string(r.remaining()) + " trailing bytes");
  }
  b.validate();
  return b;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void save_bundle(const Bundle& bundle, const std::filesystem::path& path) {
  bundle.validate();
  write_file(path, serialize_bundle(bundle));
}

Bundle load_bundle(const std::filesystem::path& path) {
  return deserialize_bundle(read_file(path));
}

}  // namespace gprompt
