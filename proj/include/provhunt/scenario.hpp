#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/graph.hpp"
#include "provhunt/partition.hpp"
#include "provhunt/reduce.hpp"

namespace provhunt {

/// A behavior subgraph plus a synthetic node joined to each of its nodes,
/// stamped with the subgraph's earliest edge time.
struct VirtualSubgraph {
  BehaviorSubgraph base;
  NodeKey virtual_key;
  Nanos t = 0;
  std::vector<std::size_t> fanout;  // node indices the virtual node connects to

  friend bool operator==(const VirtualSubgraph&, const VirtualSubgraph&) = default;
};

inline VirtualSubgraph virtualize(const BehaviorSubgraph& sub, const ProvenanceGraph& g) {
  if (sub.edge_indices.empty()) throw ValidationError("cannot virtualize an empty subgraph");
  VirtualSubgraph v;
  v.base = sub;
  v.virtual_key = NodeKey{NodeType::process, "virtual:" + std::to_string(sub.id)};
  v.t = std::numeric_limits<Nanos>::max();
  std::set<std::size_t> nodes;
  for (auto ei : sub.edge_indices) {
    const auto& e = g.edge(ei);
    v.t = std::min(v.t, e.ts);
    nodes.insert(e.src);
    nodes.insert(e.dst);
  }
  v.fanout.assign(nodes.begin(), nodes.end());
  return v;
}

struct TemporalPath {
  std::vector<std::size_t> nodes;  // node indices, first in `from`, last in `to`
  std::vector<std::size_t> edges;  // edge indices, nodes.size() - 1 of them

  std::size_t hops() const noexcept { return edges.size(); }
};

/// Fewest-hop path from any node in `from` to any node in `to`, walking
/// edges in either direction, using only edges with ts >= t_floor whose
/// timestamps never decrease along the path. Among fewest-hop paths the
/// one with the earliest final timestamp wins. Layered earliest-arrival
/// search: arriving earlier at a node never loses options, so keeping one
/// arrival time per node per layer is exact.
inline std::optional<TemporalPath> time_respecting_shortest_path(const ProvenanceGraph& g, const Adjacency& adj,
                                                                 std::span<const std::size_t> from,
                                                                 std::span<const std::size_t> to, Nanos t_floor) {
  if (from.empty() || to.empty()) return std::nullopt;
  std::vector<char> is_target(g.node_count(), 0);
  for (auto n : to) is_target[n] = 1;
  const std::set<std::size_t> sources(from.begin(), from.end());
  for (auto n : sources)
    if (is_target[n]) return TemporalPath{{n}, {}};

  constexpr Nanos kNever = std::numeric_limits<Nanos>::max();
  struct Hop {
    std::size_t edge;
    std::size_t prev;
  };
  std::vector<Nanos> arrival(g.node_count(), kNever);
  // layers[k][node] = hop used to reach node at layer k with improved arrival
  std::vector<std::map<std::size_t, Hop>> layers;
  std::vector<std::size_t> frontier(sources.begin(), sources.end());
  for (auto n : frontier) arrival[n] = t_floor;

  while (!frontier.empty()) {
    std::map<std::size_t, std::pair<Nanos, Hop>> improved;
    for (auto u : frontier) {
      const Nanos t_u = arrival[u];
      const auto& inc = adj.incident[u];
      // Incident lists are in edge order, i.e. ts order.
      auto it = std::lower_bound(inc.begin(), inc.end(), t_u,
                                 [&](const auto& p, Nanos t) { return g.edge(p.first).ts < t; });
      for (; it != inc.end(); ++it) {
        const auto [ei, v] = *it;
        const Nanos ts = g.edge(ei).ts;
        if (ts >= arrival[v]) continue;
        auto [slot, inserted] = improved.try_emplace(v, ts, Hop{ei, u});
        if (!inserted && (ts < slot->second.first || (ts == slot->second.first && ei < slot->second.second.edge)))
          slot->second = {ts, Hop{ei, u}};
      }
    }
    if (improved.empty()) break;
    auto& layer = layers.emplace_back();
    std::optional<std::size_t> best;
    frontier.clear();
    for (const auto& [v, th] : improved) {
      arrival[v] = th.first;
      layer.emplace(v, th.second);
      frontier.push_back(v);
      if (is_target[v] && (!best || th.first < arrival[*best])) best = v;
    }
    if (best) {
      TemporalPath path;
      std::size_t node = *best;
      for (std::size_t k = layers.size(); k-- > 0;) {
        const Hop& h = layers[k].at(node);
        path.nodes.push_back(node);
        path.edges.push_back(h.edge);
        node = h.prev;
      }
      path.nodes.push_back(node);
      std::reverse(path.nodes.begin(), path.nodes.end());
      std::reverse(path.edges.begin(), path.edges.end());
      return path;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

enum class EdgeOrigin { attack_subgraph, connecting_path };

struct FlaggedSubgraph {
  BehaviorSubgraph subgraph;
  std::string label;
};

struct AttackGraph {
  struct Node {
    NodeRecord record;
    std::size_t graph_index = 0;
    std::optional<std::size_t> cluster;  // first attack subgraph (by time) holding it
  };
  struct Edge {
    std::size_t src = 0;  // into nodes
    std::size_t dst = 0;
    std::string op;
    Nanos ts = 0;
    EdgeOrigin origin = EdgeOrigin::attack_subgraph;
    std::size_t graph_index = 0;
  };
  struct Annotation {
    std::size_t subgraph_id = 0;
    std::string label;
    Nanos t = 0;
  };
  struct Connection {
    std::size_t from_subgraph = 0;
    std::size_t to_subgraph = 0;
    std::vector<std::size_t> edges;  // graph edge indices
  };

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Annotation> annotations;  // ordered by t
  std::vector<Connection> paths;
  std::vector<std::string> warnings;
};

/// Orders flagged subgraphs by their virtual-node time and links each one
/// to the nearest earlier subgraph that reaches it by a time-respecting
/// path (searched over the full graph, floored at the earlier subgraph's
/// time). The result is the union of all subgraphs and paths; virtual nodes
/// never appear in it.
inline AttackGraph reconstruct(std::span<const FlaggedSubgraph> flagged, const ProvenanceGraph& g) {
  AttackGraph ag;
  if (flagged.empty()) return ag;
  std::vector<std::pair<VirtualSubgraph, std::string>> vs;
  for (const auto& f : flagged) vs.emplace_back(virtualize(f.subgraph, g), f.label);
  std::stable_sort(vs.begin(), vs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.t, a.first.base.id) < std::tie(b.first.t, b.first.base.id);
  });

  const Adjacency adj(g);
  std::map<std::size_t, EdgeOrigin> edge_origin;
  std::map<std::size_t, std::size_t> node_cluster;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto& v = vs[i].first;
    ag.annotations.push_back({v.base.id, vs[i].second, v.t});
    for (auto ei : v.base.edge_indices) edge_origin[ei] = EdgeOrigin::attack_subgraph;
    for (auto n : v.fanout) node_cluster.try_emplace(n, v.base.id);
  }
  for (std::size_t i = 1; i < vs.size(); ++i) {
    bool linked = false;
    for (std::size_t j = i; j-- > 0;) {
      auto path = time_respecting_shortest_path(g, adj, vs[j].first.fanout, vs[i].first.fanout, vs[j].first.t);
      if (!path) continue;
      ag.paths.push_back({vs[j].first.base.id, vs[i].first.base.id, path->edges});
      for (auto ei : path->edges) edge_origin.try_emplace(ei, EdgeOrigin::connecting_path);
      linked = true;
      break;
    }
    if (!linked)
      ag.warnings.push_back("subgraph " + std::to_string(vs[i].first.base.id) +
                            " has no time-respecting path from an earlier attack subgraph");
  }

  std::map<std::size_t, std::size_t> node_pos;
  auto add_node = [&](std::size_t n) {
    auto [it, inserted] = node_pos.try_emplace(n, 0);
    if (inserted) {
      it->second = ag.nodes.size();
      AttackGraph::Node node{g.node(n), n, std::nullopt};
      if (auto c = node_cluster.find(n); c != node_cluster.end()) node.cluster = c->second;
      ag.nodes.push_back(std::move(node));
    }
    return it->second;
  };
  for (const auto& [ei, origin] : edge_origin) {
    const auto& e = g.edge(ei);
    const auto s = add_node(e.src);
    const auto d = add_node(e.dst);
    ag.edges.push_back({s, d, e.op, e.ts, origin, ei});
  }
  return ag;
}

/// Number of weakly connected components of the attack graph.
inline std::size_t weak_components(const AttackGraph& ag) {
  detail::UnionFind uf(ag.nodes.size());
  for (const auto& e : ag.edges) uf.unite(e.src, e.dst);
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < ag.nodes.size(); ++i) roots.insert(uf.find(i));
  return roots.size();
}

// ---------------------------------------------------------------------------
// Export.

namespace detail {

inline std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

inline std::string_view dot_shape(NodeType t) {
  switch (t) {
    case NodeType::socket: return "diamond";
    case NodeType::process: return "rectangle";
    case NodeType::file: return "ellipse";
  }
  return "ellipse";
}

}  // namespace detail

/// Graphviz rendering. Sockets are diamonds, processes rectangles, files
/// ellipses; each attack subgraph is a cluster labelled with its TTP;
/// connecting-path edges are dashed.
inline std::string export_dot(const AttackGraph& ag) {
  std::ostringstream out;
  out << "digraph attack {\n  rankdir=LR;\n";
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ag.nodes.size(); ++i)
    if (ag.nodes[i].cluster) members[*ag.nodes[i].cluster].push_back(i);
  for (const auto& a : ag.annotations) {
    out << "  subgraph cluster_" << a.subgraph_id << " {\n    label=\"" << detail::dot_escape(a.label)
        << "\";\n";
    for (auto i : members[a.subgraph_id]) out << "    n" << i << ";\n";
    out << "  }\n";
  }
  for (std::size_t i = 0; i < ag.nodes.size(); ++i) {
    const auto& n = ag.nodes[i].record;
    out << "  n" << i << " [label=\"" << detail::dot_escape(n.name) << "\", shape=" << detail::dot_shape(n.type)
        << "];\n";
  }
  for (const auto& e : ag.edges) {
    out << "  n" << e.src << " -> n" << e.dst << " [label=\"" << detail::dot_escape(e.op) << "\"";
    if (e.origin == EdgeOrigin::connecting_path) out << ", style=dashed";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

/// One JSON record per line: nodes, then edges, then annotations, then
/// connecting paths.
inline std::string export_jsonl(const AttackGraph& ag) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ag.nodes.size(); ++i) {
    const auto& n = ag.nodes[i];
    nlohmann::ordered_json j{{"kind", "node"},
                             {"index", i},
                             {"type", to_string(n.record.type)},
                             {"id", n.record.id},
                             {"name", n.record.name}};
    if (n.cluster) j["subgraph_id"] = *n.cluster;
    out << j.dump() << '\n';
  }
  for (const auto& e : ag.edges) {
    nlohmann::ordered_json j{{"kind", "edge"},
                             {"src", e.src},
                             {"dst", e.dst},
                             {"op", e.op},
                             {"ts", e.ts},
                             {"origin", e.origin == EdgeOrigin::attack_subgraph ? "attack-subgraph" : "connecting-path"}};
    out << j.dump() << '\n';
  }
  for (const auto& a : ag.annotations) {
    nlohmann::ordered_json j{{"kind", "annotation"}, {"subgraph_id", a.subgraph_id}, {"label", a.label}, {"t", a.t}};
    out << j.dump() << '\n';
  }
  for (const auto& p : ag.paths) {
    nlohmann::ordered_json j{{"kind", "path"},
                             {"from_subgraph", p.from_subgraph},
                             {"to_subgraph", p.to_subgraph},
                             {"edges", p.edges}};
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace provhunt
