#pragma once

#include <cstdio>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "provhunt/graph.hpp"

namespace provhunt {

/// Confusion counts and the usual ratios. A ratio whose denominator is
/// zero is reported as 0 and flagged.
struct MetricReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double fpr = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

/// Percentage with two decimals, e.g. 0.76666 -> "76.67".
inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

inline MetricReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  MetricReport r{tp, fp, fn, tn};
  auto ratio = [](std::size_t num, std::size_t den, bool* undefined) {
    if (den == 0) {
      if (undefined) *undefined = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = ratio(tp, tp + fp, &r.precision_undefined);
  r.recall = ratio(tp, tp + fn, &r.recall_undefined);
  r.accuracy = ratio(tp + tn, r.total(), nullptr);
  r.fpr = ratio(fp, fp + tn, nullptr);
  return r;
}

/// Confusion counts of `predicted` against `truth` within the universe
/// `all`. Items outside `all` are ignored.
template <typename T>
MetricReport set_metrics(const std::set<T>& predicted, const std::set<T>& truth, const std::set<T>& all) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& x : all) {
    const bool p = predicted.count(x) > 0;
    const bool t = truth.count(x) > 0;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

template <typename T>
MetricReport node_metrics(const std::set<T>& pred_attack_nodes, const std::set<T>& truth_attack_nodes,
                          const std::set<T>& all_nodes) {
  return set_metrics(pred_attack_nodes, truth_attack_nodes, all_nodes);
}

inline MetricReport graph_metrics(const std::set<std::size_t>& pred_ids, const std::set<std::size_t>& truth_ids,
                                  const std::set<std::size_t>& all_ids) {
  return set_metrics(pred_ids, truth_ids, all_ids);
}

/// Graph node indices matching truth keys. A node produced by merging
/// (id "a+b+...") matches when any member id of the same type does.
inline std::set<std::size_t> resolve_truth_nodes(const std::set<NodeKey>& truth, const ProvenanceGraph& g) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& n = g.node(i);
    if (truth.count(n.key())) {
      out.insert(i);
      continue;
    }
    if (n.id.find('+') == std::string::npos) continue;
    std::size_t start = 0;
    while (start <= n.id.size()) {
      auto end = n.id.find('+', start);
      if (end == std::string::npos) end = n.id.size();
      if (truth.count(NodeKey{n.type, n.id.substr(start, end - start)})) {
        out.insert(i);
        break;
      }
      start = end + 1;
    }
  }
  return out;
}

/// `truth` plus every node within two undirected hops of it.
inline std::set<std::size_t> expand_2hop(const std::set<std::size_t>& truth, const ProvenanceGraph& g) {
  std::vector<std::vector<std::size_t>> nbrs(g.node_count());
  for (const auto& e : g.edges()) {
    nbrs[e.src].push_back(e.dst);
    nbrs[e.dst].push_back(e.src);
  }
  std::set<std::size_t> out(truth.begin(), truth.end());
  std::vector<std::size_t> frontier(truth.begin(), truth.end());
  for (int hop = 0; hop < 2; ++hop) {
    std::vector<std::size_t> next;
    for (auto u : frontier)
      for (auto v : nbrs[u])
        if (out.insert(v).second) next.push_back(v);
    frontier = std::move(next);
  }
  return out;
}

}  // namespace provhunt
