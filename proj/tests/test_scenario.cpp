#include <gtest/gtest.h>

#include "provhunt/ingest.hpp"
#include "provhunt/scenario.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace provhunt;
using fixture::proc_to;

namespace {

const auto F = NodeType::file;
const auto P = NodeType::process;

ProvenanceGraph random_small_graph(Rng& rng) {
  const std::size_t n = 2 + rng.below(5);
  std::vector<Event> evs;
  const std::size_t m = 1 + rng.below(9);
  for (std::size_t k = 0; k < m; ++k) {
    const auto a = rng.below(n), b = rng.below(n);
    const auto ts = static_cast<Nanos>(rng.below(6));
    evs.push_back(fixture::ev(ts, "n" + std::to_string(a), P, "n" + std::to_string(a), "op", "n" + std::to_string(b), P,
                              "n" + std::to_string(b)));
  }
  return build_graph(evs);
}

BehaviorSubgraph whole(const ProvenanceGraph& g, std::size_t id, std::vector<std::size_t> edges) {
  BehaviorSubgraph s;
  s.id = id;
  s.edge_indices = std::move(edges);
  for (auto ei : s.edge_indices) {
    s.node_indices.push_back(g.edge(ei).src);
    s.node_indices.push_back(g.edge(ei).dst);
  }
  std::sort(s.node_indices.begin(), s.node_indices.end());
  s.node_indices.erase(std::unique(s.node_indices.begin(), s.node_indices.end()), s.node_indices.end());
  s.t_start = g.edge(s.edge_indices.front()).ts;
  s.t_end = g.edge(s.edge_indices.back()).ts;
  return s;
}

}  // namespace

TEST(TemporalPath, MatchesExhaustiveSearch) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_small_graph(rng);
    const Adjacency adj(g);
    std::set<std::size_t> from{rng.below(g.node_count())}, to{rng.below(g.node_count())};
    if (rng.below(2)) to.insert(rng.below(g.node_count()));
    const Nanos floor = static_cast<Nanos>(rng.below(4));
    const std::vector<std::size_t> fv(from.begin(), from.end()), tv(to.begin(), to.end());
    const auto got = time_respecting_shortest_path(g, adj, fv, tv, floor);
    const auto want = oracle::best_temporal_path(g, from, to, floor);
    ASSERT_EQ(got.has_value(), want.has_value()) << "trial " << trial;
    if (!got) continue;
    ASSERT_EQ(got->hops(), want->hops);
    if (got->hops() == 0) continue;
    EXPECT_EQ(g.edge(got->edges.back()).ts, want->final_ts);
    // The returned path is well formed.
    EXPECT_TRUE(from.count(got->nodes.front()));
    EXPECT_TRUE(to.count(got->nodes.back()));
    Nanos t = floor;
    for (std::size_t k = 0; k < got->edges.size(); ++k) {
      const auto& e = g.edge(got->edges[k]);
      EXPECT_GE(e.ts, t);
      t = e.ts;
      const auto a = got->nodes[k], b = got->nodes[k + 1];
      EXPECT_TRUE((e.src == a && e.dst == b) || (e.src == b && e.dst == a));
    }
  }
}

TEST(TemporalPath, ReversedTimestampsUnreachable) {
  // a -> b at t=5, b -> c at t=2: no time-respecting path a..c.
  const auto g = build_graph(std::vector<Event>{
      fixture::ev(5, "a", P, "a", "x", "b", P, "b"),
      fixture::ev(2, "b", P, "b", "x", "c", P, "c"),
  });
  const Adjacency adj(g);
  const std::vector<std::size_t> a{*g.find({P, "a"})}, c{*g.find({P, "c"})};
  EXPECT_FALSE(time_respecting_shortest_path(g, adj, a, c, 0));
  EXPECT_TRUE(time_respecting_shortest_path(g, adj, c, a, 0));
  EXPECT_FALSE(time_respecting_shortest_path(g, adj, c, a, 3));
}

TEST(Virtualize, EarliestTimeAndFanout) {
  const auto g = build_graph(std::vector<Event>{
      proc_to(7, "p", "sh", "read", F, "/a"),
      proc_to(9, "p", "sh", "write", F, "/b"),
  });
  const auto v = virtualize(whole(g, 4, {0, 1}), g);
  EXPECT_EQ(v.t, 7);
  EXPECT_EQ(v.fanout.size(), 3u);
  EXPECT_EQ(v.virtual_key.id, "virtual:4");
  EXPECT_THROW(virtualize(BehaviorSubgraph{}, g), ValidationError);
}

TEST(Reconstruct, LinksStagesThroughConnectingPath) {
  // stage A: nginx clone sh; path: sh write /tmp/x, cron read /tmp/x; stage B: cron write /etc/shadow
  const auto g = build_graph(std::vector<Event>{
      fixture::ev(10, "n", P, "nginx", "clone", "s", P, "sh"),
      proc_to(20, "s", "sh", "write", F, "/tmp/x"),
      proc_to(30, "c", "cron", "read", F, "/tmp/x"),
      proc_to(40, "c", "cron", "write", F, "/etc/shadow"),
      proc_to(50, "z", "ls", "read", F, "/home"),
  });
  const std::vector<FlaggedSubgraph> flagged{{whole(g, 1, {3}), "T1068"}, {whole(g, 0, {0}), "T1059"}};
  const auto ag = reconstruct(flagged, g);
  EXPECT_TRUE(ag.warnings.empty());
  ASSERT_EQ(ag.annotations.size(), 2u);
  EXPECT_EQ(ag.annotations[0].label, "T1059");
  ASSERT_EQ(ag.paths.size(), 1u);
  EXPECT_EQ(ag.paths[0].from_subgraph, 0u);
  EXPECT_EQ(ag.paths[0].to_subgraph, 1u);
  EXPECT_EQ(ag.nodes.size(), 5u);
  EXPECT_EQ(ag.edges.size(), 4u);
  EXPECT_EQ(weak_components(ag), 1u);
  std::size_t dashed = 0;
  for (const auto& e : ag.edges) dashed += e.origin == EdgeOrigin::connecting_path;
  EXPECT_EQ(dashed, 2u);

  const auto dot = export_dot(ag);
  EXPECT_NE(dot.find("subgraph cluster_0"), std::string::npos);
  EXPECT_NE(dot.find("label=\"T1068\""), std::string::npos);
  EXPECT_NE(dot.find("shape=rectangle"), std::string::npos);
  EXPECT_NE(dot.find("shape=ellipse"), std::string::npos);
  EXPECT_NE(dot.find("style=dashed"), std::string::npos);
  EXPECT_EQ(dot.find("virtual"), std::string::npos);

  const auto jl = export_jsonl(ag);
  EXPECT_EQ(std::count(jl.begin(), jl.end(), '\n'), 5 + 4 + 2 + 1);
  EXPECT_NE(jl.find("\"origin\":\"connecting-path\""), std::string::npos);
}

TEST(Reconstruct, UnlinkedStageWarns) {
  const auto g = build_graph(std::vector<Event>{
      proc_to(10, "a", "a", "read", F, "/x"),
      proc_to(20, "b", "b", "read", F, "/y"),
  });
  const std::vector<FlaggedSubgraph> flagged{{whole(g, 0, {0}), "T1059"}, {whole(g, 1, {1}), "T1105"}};
  const auto ag = reconstruct(flagged, g);
  EXPECT_EQ(ag.warnings.size(), 1u);
  EXPECT_EQ(weak_components(ag), 2u);
  EXPECT_TRUE(reconstruct({}, g).nodes.empty());
}

TEST(ExportDot, EscapesAndSocketShape) {
  AttackGraph ag;
  ag.nodes.push_back({NodeRecord{NodeType::socket, "s", "1.2.3.4:\"80\""}, 0, 0});
  ag.annotations.push_back({0, "T1071", 0});
  const auto dot = export_dot(ag);
  EXPECT_NE(dot.find("shape=diamond"), std::string::npos);
  EXPECT_NE(dot.find("1.2.3.4:\\\"80\\\""), std::string::npos);
}
