#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "provhunt/common.hpp"

namespace provhunt {

enum class NodeType : std::uint8_t { process = 0, file = 1, socket = 2 };

inline std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::process: return "process";
    case NodeType::file: return "file";
    case NodeType::socket: return "socket";
  }
  return "?";
}

inline std::optional<NodeType> node_type_from_string(std::string_view s) {
  if (s == "process") return NodeType::process;
  if (s == "file") return NodeType::file;
  if (s == "socket") return NodeType::socket;
  return std::nullopt;
}

struct NodeKey {
  NodeType type{};
  std::string id;

  friend auto operator<=>(const NodeKey&, const NodeKey&) = default;
  friend bool operator==(const NodeKey&, const NodeKey&) = default;

  /// "process:p1" form used by truth files and reports.
  std::string str() const { return std::string(to_string(type)) + ":" + id; }

  static NodeKey parse(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) throw ValidationError("node key without type: " + std::string(s));
    auto t = node_type_from_string(s.substr(0, colon));
    if (!t) throw ValidationError("unknown node type in key: " + std::string(s));
    return NodeKey{*t, std::string(s.substr(colon + 1))};
  }
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const noexcept {
    return static_cast<std::size_t>(fnv1a(k.id, 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(k.type)));
  }
};

struct NodeRecord {
  NodeType type{};
  std::string id;
  std::string name;

  NodeKey key() const { return NodeKey{type, id}; }
  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

/// Endpoints are indices into ProvenanceGraph::nodes.
struct EdgeRecord {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::string op;
  Nanos ts = 0;

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

/// Timestamped directed multigraph. Nodes are sorted by key; edges are
/// sorted by (ts, src_name, op, dst_name, src_key, dst_key). Both orders
/// are canonical, so two graphs built from the same event multiset compare
/// equal.
class ProvenanceGraph {
 public:
  ProvenanceGraph() = default;

  const std::vector<NodeRecord>& nodes() const noexcept { return nodes_; }
  const std::vector<EdgeRecord>& edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return nodes_.empty() && edges_.empty(); }

  const NodeRecord& node(std::size_t i) const { return nodes_.at(i); }
  const EdgeRecord& edge(std::size_t i) const { return edges_.at(i); }
  const NodeRecord& src_of(const EdgeRecord& e) const { return nodes_[e.src]; }
  const NodeRecord& dst_of(const EdgeRecord& e) const { return nodes_[e.dst]; }

  std::optional<std::size_t> find(const NodeKey& key) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), key,
                               [](const NodeRecord& n, const NodeKey& k) { return n.key() < k; });
    if (it == nodes_.end() || it->key() != key) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  friend bool operator==(const ProvenanceGraph&, const ProvenanceGraph&) = default;

 private:
  friend class GraphBuilder;
  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
};

/// Accumulates edges between keyed nodes and produces a canonical graph.
/// When a key is seen with several names, the name attached to the
/// earliest edge wins (ties: lexicographically smallest).
class GraphBuilder {
 public:
  void reserve(std::size_t edges) { pending_.reserve(edges); }

  void add_edge(const NodeRecord& src, const NodeRecord& dst, std::string op, Nanos ts) {
    const std::size_t s = intern(src, ts);
    const std::size_t d = intern(dst, ts);
    pending_.push_back(EdgeRecord{s, d, std::move(op), ts});
  }

  /// Adds a node that may have no incident edges.
  void add_node(const NodeRecord& n, Nanos ts = 0) { intern(n, ts); }

  ProvenanceGraph build() && {
    std::vector<std::size_t> order(staged_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return staged_[a].rec.key() < staged_[b].rec.key();
    });
    std::vector<std::size_t> remap(staged_.size());
    ProvenanceGraph g;
    g.nodes_.reserve(staged_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      remap[order[i]] = i;
      g.nodes_.push_back(std::move(staged_[order[i]].rec));
    }
    for (auto& e : pending_) {
      e.src = remap[e.src];
      e.dst = remap[e.dst];
    }
    const auto& nodes = g.nodes_;
    std::sort(pending_.begin(), pending_.end(), [&](const EdgeRecord& a, const EdgeRecord& b) {
      if (a.ts != b.ts) return a.ts < b.ts;
      if (int c = nodes[a.src].name.compare(nodes[b.src].name); c != 0) return c < 0;
      if (int c = a.op.compare(b.op); c != 0) return c < 0;
      if (int c = nodes[a.dst].name.compare(nodes[b.dst].name); c != 0) return c < 0;
      if (a.src != b.src) return a.src < b.src;
      return a.dst < b.dst;
    });
    g.edges_ = std::move(pending_);
    staged_.clear();
    index_.clear();
    return g;
  }

 private:
  struct Staged {
    NodeRecord rec;
    Nanos name_ts;
  };

  std::size_t intern(const NodeRecord& n, Nanos ts) {
    auto key = n.key();
    auto [it, inserted] = index_.try_emplace(std::move(key), staged_.size());
    if (inserted) {
      staged_.push_back(Staged{n, ts});
    } else {
      auto& s = staged_[it->second];
      if (ts < s.name_ts || (ts == s.name_ts && n.name < s.rec.name)) {
        s.rec.name = n.name;
        s.name_ts = ts;
      }
    }
    return it->second;
  }

  std::vector<Staged> staged_;
  std::unordered_map<NodeKey, std::size_t, NodeKeyHash> index_;
  std::vector<EdgeRecord> pending_;
};

/// Builds a graph from an existing one keeping only edges for which
/// `keep(edge_index)` holds; nodes left without edges are dropped.
template <typename Pred>
ProvenanceGraph filter_edges(const ProvenanceGraph& g, Pred keep) {
  GraphBuilder b;
  b.reserve(g.edge_count());
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (keep(i)) b.add_edge(g.src_of(e), g.dst_of(e), e.op, e.ts);
  }
  return std::move(b).build();
}

/// Undirected adjacency over edge indices, built once per graph.
struct Adjacency {
  // incident[n] = list of (edge index, neighbour node index)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> incident;
  // successors[n] = list of (edge index, dst) for edges with src == n
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> outgoing;

  explicit Adjacency(const ProvenanceGraph& g)
      : incident(g.node_count()), outgoing(g.node_count()) {
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
      const auto& e = g.edge(i);
      outgoing[e.src].emplace_back(i, e.dst);
      incident[e.src].emplace_back(i, e.dst);
      if (e.dst != e.src) incident[e.dst].emplace_back(i, e.src);
    }
  }
};

}  // namespace provhunt
