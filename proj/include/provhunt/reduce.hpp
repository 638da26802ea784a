#pragma once

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "provhunt/common.hpp"
#include "provhunt/graph.hpp"

namespace provhunt {

struct ReduceConfig {
  Nanos net_window_ns = 1 * kNanosPerSecond;
  Nanos cascade_window_ns = 5 * kNanosPerSecond;
  Nanos file_window_ns = 5 * kNanosPerSecond;
  double sim_threshold = 0.7;

  void validate() const {
    if (net_window_ns <= 0 || cascade_window_ns <= 0 || file_window_ns <= 0)
      throw ValidationError("reduction windows must be positive");
    if (!(sim_threshold >= 0.0 && sim_threshold <= 1.0))
      throw ValidationError("sim_threshold must be in [0,1]");
  }
};

struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string w) { warnings.push_back(std::move(w)); }
};

/// Levenshtein distance over bytes, two-row DP.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 1 - lev(a,b) / max(|a|,|b|); 1 when both are empty.
inline double name_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

namespace detail {

struct SocketAddress {
  std::string ip;
  std::vector<long> ports;
};

// Accepts "ip:port" and the merged form "ip:p1_p2_...".
inline std::optional<SocketAddress> parse_socket_name(std::string_view name) {
  const auto colon = name.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == name.size()) return std::nullopt;
  SocketAddress addr;
  addr.ip = std::string(name.substr(0, colon));
  std::string_view rest = name.substr(colon + 1);
  while (!rest.empty()) {
    const auto us = rest.find('_');
    const auto part = rest.substr(0, us);
    long port = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), port);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) return std::nullopt;
    addr.ports.push_back(port);
    if (us == std::string_view::npos) break;
    rest.remove_prefix(us + 1);
    if (rest.empty()) return std::nullopt;
  }
  return addr;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::vector<std::string_view> path_components(std::string_view path) {
  std::vector<std::string_view> out;
  for (auto c : split(path, '/'))
    if (!c.empty()) out.push_back(c);
  return out;
}

inline std::string join_components(const std::vector<std::string_view>& comps, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back('/');
    out.append(comps[i]);
  }
  return out;
}

inline std::pair<std::string_view, std::string_view> split_parent(std::string_view path) {
  const auto slash = path.rfind('/');
  if (slash == std::string_view::npos) return {std::string_view{}, path};
  return {path.substr(0, slash), path.substr(slash + 1)};
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Rule 1. Process-to-socket edges toward the same IP that fall inside one
/// rolling window collapse into a single edge: ports joined with '_',
/// distinct ops joined with '_' in first-seen order, earliest timestamp.
inline ProvenanceGraph merge_network_events(const ProvenanceGraph& g, const ReduceConfig& cfg,
                                            Diagnostics* diag = nullptr) {
  cfg.validate();
  std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> groups;
  std::vector<char> grouped(g.edge_count(), 0);
  std::set<std::size_t> warned;
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (g.src_of(e).type != NodeType::process || g.dst_of(e).type != NodeType::socket) continue;
    auto addr = detail::parse_socket_name(g.dst_of(e).name);
    if (!addr) {
      if (diag && warned.insert(e.dst).second)
        diag->warn("socket name not parseable as ip:port: " + g.dst_of(e).name);
      continue;
    }
    groups[{e.src, addr->ip}].push_back(i);
    grouped[i] = 1;
  }

  GraphBuilder b;
  b.reserve(g.edge_count());
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    if (grouped[i]) continue;
    const auto& e = g.edge(i);
    b.add_edge(g.src_of(e), g.dst_of(e), e.op, e.ts);
  }

  for (const auto& [key, idx] : groups) {
    std::size_t start = 0;
    while (start < idx.size()) {
      const Nanos t0 = g.edge(idx[start]).ts;
      std::size_t end = start + 1;
      while (end < idx.size() && g.edge(idx[end]).ts - t0 < cfg.net_window_ns) ++end;

      std::vector<std::string> ops;
      std::set<std::size_t> sockets;
      std::set<long> ports;
      for (std::size_t k = start; k < end; ++k) {
        const auto& e = g.edge(idx[k]);
        for (auto part : detail::split(e.op, '_')) {
          if (std::find(ops.begin(), ops.end(), part) == ops.end()) ops.emplace_back(part);
        }
        sockets.insert(e.dst);
        const auto addr = detail::parse_socket_name(g.dst_of(e).name);
        ports.insert(addr->ports.begin(), addr->ports.end());
      }
      std::string op;
      for (const auto& o : ops) op += (op.empty() ? "" : "_") + o;

      NodeRecord dst;
      if (sockets.size() == 1) {
        dst = g.node(*sockets.begin());
      } else {
        dst.type = NodeType::socket;
        dst.name = key.second + ":";
        bool first = true;
        for (long p : ports) {
          dst.name += (first ? "" : "_") + std::to_string(p);
          first = false;
        }
        std::vector<std::string> ids;
        for (auto s : sockets) ids.push_back(g.node(s).id);
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) dst.id += (dst.id.empty() ? "" : "+") + id;
      }
      b.add_edge(g.node(key.first), dst, end - start == 1 ? g.edge(idx[start]).op : op, t0);
      start = end;
    }
  }
  return std::move(b).build();
}

/// Rule 2. For each process, an access to path A is dropped when the same
/// process accesses a path strictly below A (component-wise) within the
/// cascade window. Only the deepest level of each chain survives.
inline ProvenanceGraph collapse_directory_cascades(const ProvenanceGraph& g, const ReduceConfig& cfg) {
  cfg.validate();
  // (process, normalized path) -> [(ts, edge)] sorted by ts
  std::map<std::pair<std::size_t, std::string>, std::vector<std::pair<Nanos, std::size_t>>> accesses;
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (g.src_of(e).type != NodeType::process || g.dst_of(e).type != NodeType::file) continue;
    const auto comps = detail::path_components(g.dst_of(e).name);
    accesses[{e.src, detail::join_components(comps, comps.size())}].emplace_back(e.ts, i);
  }

  std::vector<char> removed(g.edge_count(), 0);
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (g.src_of(e).type != NodeType::process || g.dst_of(e).type != NodeType::file) continue;
    const auto comps = detail::path_components(g.dst_of(e).name);
    for (std::size_t depth = 0; depth < comps.size(); ++depth) {
      auto it = accesses.find({e.src, detail::join_components(comps, depth)});
      if (it == accesses.end()) continue;
      const auto& list = it->second;
      auto lo = std::upper_bound(list.begin(), list.end(), std::make_pair(e.ts - cfg.cascade_window_ns,
                                                                          std::numeric_limits<std::size_t>::max()));
      for (; lo != list.end() && lo->first < e.ts + cfg.cascade_window_ns; ++lo) removed[lo->second] = 1;
    }
  }
  return filter_edges(g, [&](std::size_t i) { return !removed[i]; });
}

namespace detail {

inline bool merge_similar_files_once(const ProvenanceGraph& g, const ReduceConfig& cfg, ProvenanceGraph& out) {
  // First touch of each file by each source, grouped by (source, parent dir).
  std::map<std::pair<std::size_t, std::size_t>, Nanos> first_touch;
  std::vector<Nanos> global_first(g.node_count(), std::numeric_limits<Nanos>::max());
  for (const auto& e : g.edges()) {
    global_first[e.src] = std::min(global_first[e.src], e.ts);
    global_first[e.dst] = std::min(global_first[e.dst], e.ts);
    if (g.dst_of(e).type != NodeType::file) continue;
    auto [it, inserted] = first_touch.try_emplace({e.src, e.dst}, e.ts);
    if (!inserted) it->second = std::min(it->second, e.ts);
  }
  std::map<std::pair<std::size_t, std::string_view>, std::vector<std::pair<Nanos, std::size_t>>> groups;
  for (const auto& [k, ts] : first_touch) {
    const auto parent = split_parent(g.node(k.second).name).first;
    groups[{k.first, parent}].emplace_back(ts, k.second);
  }

  UnionFind uf(g.node_count());
  bool merged = false;
  for (auto& [key, files] : groups) {
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto base_i = split_parent(g.node(files[i].second).name).second;
      for (std::size_t j = i + 1; j < files.size() && files[j].first - files[i].first < cfg.file_window_ns; ++j) {
        if (uf.find(files[i].second) == uf.find(files[j].second)) continue;
        const auto base_j = split_parent(g.node(files[j].second).name).second;
        if (name_similarity(base_i, base_j) > cfg.sim_threshold) {
          uf.unite(files[i].second, files[j].second);
          merged = true;
        }
      }
    }
  }
  if (!merged) return false;

  // Representative: earliest-touched member, then smallest name, then key.
  std::vector<std::size_t> rep(g.node_count());
  std::iota(rep.begin(), rep.end(), std::size_t{0});
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t n = 0; n < g.node_count(); ++n) clusters[uf.find(n)].push_back(n);
  std::vector<char> clustered(g.node_count(), 0);
  for (const auto& [root, members] : clusters) {
    if (members.size() < 2) continue;
    const auto best = *std::min_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(global_first[a], g.node(a).name, a) < std::tie(global_first[b], g.node(b).name, b);
    });
    for (auto m : members) {
      rep[m] = best;
      clustered[m] = 1;
    }
  }

  GraphBuilder b;
  b.reserve(g.edge_count());
  std::map<std::tuple<std::size_t, std::string_view, std::size_t>, Nanos> collapsed;
  for (const auto& e : g.edges()) {
    const std::size_t s = rep[e.src];
    const std::size_t d = rep[e.dst];
    if (clustered[e.src] || clustered[e.dst]) {
      auto [it, inserted] = collapsed.try_emplace({s, e.op, d}, e.ts);
      if (!inserted) it->second = std::min(it->second, e.ts);
    } else {
      b.add_edge(g.node(s), g.node(d), e.op, e.ts);
    }
  }
  for (const auto& [k, ts] : collapsed)
    b.add_edge(g.node(std::get<0>(k)), g.node(std::get<2>(k)), std::string(std::get<1>(k)), ts);
  out = std::move(b).build();
  return true;
}

}  // namespace detail

/// Rule 3. File nodes touched by the same source under the same parent
/// directory within the file window are clustered when their basenames are
/// more similar than the threshold (transitive closure). Each cluster
/// becomes its earliest-touched member; duplicate (src, op, dst) edges
/// created by the collapse keep the earliest timestamp. Repeats until no
/// cluster forms, so the result is a fixpoint.
inline ProvenanceGraph merge_similar_files(const ProvenanceGraph& g, const ReduceConfig& cfg) {
  cfg.validate();
  ProvenanceGraph cur = g;
  ProvenanceGraph next;
  while (detail::merge_similar_files_once(cur, cfg, next)) cur = std::move(next);
  return cur;
}

struct ReduceStep {
  std::string rule;
  std::size_t nodes_before = 0, nodes_after = 0;
  std::size_t edges_before = 0, edges_after = 0;
};

struct ReduceReport {
  std::vector<ReduceStep> steps;
  std::vector<std::string> warnings;
};

/// Network merge, then cascade collapse, then similar-file merge.
inline ProvenanceGraph reduce_all(const ProvenanceGraph& g, const ReduceConfig& cfg,
                                  ReduceReport* report = nullptr) {
  Diagnostics diag;
  auto record = [&](const char* rule, const ProvenanceGraph& before, const ProvenanceGraph& after) {
    if (report)
      report->steps.push_back({rule, before.node_count(), after.node_count(), before.edge_count(), after.edge_count()});
  };
  auto g1 = merge_network_events(g, cfg, &diag);
  record("network_merge", g, g1);
  auto g2 = collapse_directory_cascades(g1, cfg);
  record("cascade_collapse", g1, g2);
  auto g3 = merge_similar_files(g2, cfg);
  record("similar_file_merge", g2, g3);
  if (report) report->warnings = std::move(diag.warnings);
  return g3;
}

}  // namespace provhunt
