#pragma once

#include <algorithm>
#include <cassert>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "provhunt/common.hpp"
#include "provhunt/graph.hpp"

namespace provhunt {

inline constexpr Nanos kDefaultThetaMax = 20 * kNanosPerMinute;

/// A temporally dense run of events from one dependency component.
struct BehaviorSubgraph {
  std::size_t id = 0;
  std::size_t component = 0;
  std::vector<std::size_t> edge_indices;  // into the parent graph, ts order
  std::vector<std::size_t> node_indices;  // sorted, derived from edges
  Nanos t_start = 0;
  Nanos t_end = 0;

  friend bool operator==(const BehaviorSubgraph&, const BehaviorSubgraph&) = default;
};

struct Triple {
  std::string src_name;
  std::string op;
  std::string dst_name;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct LogSequence {
  std::size_t subgraph_id = 0;
  std::vector<Triple> triples;
  std::string text;
};

/// Depth-first dependency components. Start nodes are taken in order of
/// their earliest incident edge (then key); each DFS follows edge
/// direction from the start and claims every node it reaches for the first
/// time. A component owns the out-edges of the nodes it claimed, which are
/// exactly the edges whose endpoints both lie in its node set and whose
/// source no earlier component claimed. Returned edge lists are ts-sorted.
inline std::vector<std::vector<std::size_t>> dependency_components(const ProvenanceGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<Nanos> first_ts(n, std::numeric_limits<Nanos>::max());
  std::vector<std::vector<std::size_t>> out_edges(n);
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    first_ts[e.src] = std::min(first_ts[e.src], e.ts);
    first_ts[e.dst] = std::min(first_ts[e.dst], e.ts);
    out_edges[e.src].push_back(i);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Node indices already follow key order, so the index is the key tiebreak.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return first_ts[a] < first_ts[b]; });

  std::vector<char> visited(n, 0);
  std::vector<std::vector<std::size_t>> components;
  std::vector<std::size_t> stack;
  for (std::size_t start : order) {
    if (visited[start]) continue;
    std::vector<std::size_t> owned;
    visited[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t ei : out_edges[node]) {
        owned.push_back(ei);
        const std::size_t next = g.edge(ei).dst;
        if (!visited[next]) {
          visited[next] = 1;
          stack.push_back(next);
        }
      }
    }
    if (owned.empty()) continue;
    std::sort(owned.begin(), owned.end());
    components.push_back(std::move(owned));
  }
  return components;
}

/// Cuts a ts-sorted edge list wherever consecutive timestamps differ by at
/// least theta_max. The segment after the last cut is emitted too.
/// Returns [begin, end) offsets into `timestamps`.
inline std::vector<std::pair<std::size_t, std::size_t>> split_offsets(std::span<const Nanos> timestamps,
                                                                      Nanos theta_max) {
  std::vector<std::pair<std::size_t, std::size_t>> cuts;
  if (timestamps.empty()) return cuts;
  std::size_t start = 0;
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] >= theta_max) {
      cuts.emplace_back(start, i);
      start = i;
    }
  }
  cuts.emplace_back(start, timestamps.size());
  return cuts;
}

inline std::vector<BehaviorSubgraph> split_by_time_density(const ProvenanceGraph& g,
                                                           std::span<const std::size_t> edges,
                                                           Nanos theta_max) {
  if (theta_max <= 0) throw ValidationError("theta_max must be positive");
  std::vector<Nanos> ts(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    ts[i] = g.edge(edges[i]).ts;
    if (i > 0 && ts[i] < ts[i - 1]) throw ValidationError("split_by_time_density: edges not ts-sorted");
  }
  std::vector<BehaviorSubgraph> out;
  for (auto [b, e] : split_offsets(ts, theta_max)) {
    BehaviorSubgraph s;
    s.edge_indices.assign(edges.begin() + static_cast<std::ptrdiff_t>(b), edges.begin() + static_cast<std::ptrdiff_t>(e));
    for (auto ei : s.edge_indices) {
      s.node_indices.push_back(g.edge(ei).src);
      s.node_indices.push_back(g.edge(ei).dst);
    }
    std::sort(s.node_indices.begin(), s.node_indices.end());
    s.node_indices.erase(std::unique(s.node_indices.begin(), s.node_indices.end()), s.node_indices.end());
    s.t_start = ts[b];
    s.t_end = ts[e - 1];
    out.push_back(std::move(s));
  }
  return out;
}

/// Full partition. Subgraph ids follow (t_start, first edge index) order.
inline std::vector<BehaviorSubgraph> partition(const ProvenanceGraph& g, Nanos theta_max = kDefaultThetaMax) {
  std::vector<BehaviorSubgraph> all;
  const auto components = dependency_components(g);
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (auto& s : split_by_time_density(g, components[c], theta_max)) {
      s.component = c;
      all.push_back(std::move(s));
    }
  }
  std::sort(all.begin(), all.end(), [](const BehaviorSubgraph& a, const BehaviorSubgraph& b) {
    return std::tie(a.t_start, a.edge_indices.front()) < std::tie(b.t_start, b.edge_indices.front());
  });
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = i;
  return all;
}

inline constexpr std::string_view kTripleSeparator = " ; ";

inline LogSequence to_sequence(const BehaviorSubgraph& sub, const ProvenanceGraph& g) {
  LogSequence seq;
  seq.subgraph_id = sub.id;
  seq.triples.reserve(sub.edge_indices.size());
  for (auto ei : sub.edge_indices) {
    const auto& e = g.edge(ei);
    seq.triples.push_back(Triple{g.src_of(e).name, e.op, g.dst_of(e).name});
    if (!seq.text.empty()) seq.text += kTripleSeparator;
    const auto& t = seq.triples.back();
    seq.text += t.src_name + " " + t.op + " " + t.dst_name;
  }
  return seq;
}

}  // namespace provhunt
