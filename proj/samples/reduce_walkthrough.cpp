// Builds a small mail-client trace and prints the graph after each
// reduction rule.

#include <iostream>

#include "provhunt/ingest.hpp"
#include "provhunt/reduce.hpp"

using namespace provhunt;

namespace {

void print(const char* title, const ProvenanceGraph& g) {
  std::cout << "== " << title << " (" << g.node_count() << " nodes, " << g.edge_count() << " edges)\n";
  for (const auto& e : g.edges())
    std::cout << "  " << e.ts << "  " << g.src_of(e).name << " " << e.op << " " << g.dst_of(e).name << '\n';
}

}  // namespace

int main() {
  const Nanos t0 = 79'568 * kNanosPerSecond;  // 22:06:08
  auto ev = [](Nanos ts, const char* sid, NodeType st, const char* sname, const char* op, const char* did,
               NodeType dt, const char* dname) { return Event{ts, sid, st, sname, op, did, dt, dname}; };
  const auto P = NodeType::process, F = NodeType::file, S = NodeType::socket;
  std::vector<Event> events{
      ev(t0, "p1", P, "alpine", "connect", "s1", S, "127.0.0.1:1"),
      ev(t0 + 200'000'000, "p1", P, "alpine", "read", "s2", S, "127.0.0.1:25"),
      ev(t0 + 1 * kNanosPerSecond, "p1", P, "alpine", "read", "f1", F, "/usr/home/user"),
      ev(t0 + 2 * kNanosPerSecond, "p1", P, "alpine", "read", "f2", F, "/usr/home/user/mail"),
      ev(t0 + 3 * kNanosPerSecond, "p1", P, "alpine", "write", "f3", F, "/usr/home/user/mail/sent"),
      ev(t0 + 4 * kNanosPerSecond, "p1", P, "alpine", "write", "f4", F, "/var/mail/msg.1001.lock"),
      ev(t0 + 5 * kNanosPerSecond, "p1", P, "alpine", "write", "f5", F, "/var/mail/msg.1002.lock"),
  };
  ReduceConfig cfg;
  auto g = build_graph(events);
  print("raw", g);
  g = merge_network_events(g, cfg);
  print("network merge", g);
  g = collapse_directory_cascades(g, cfg);
  print("cascade collapse", g);
  g = merge_similar_files(g, cfg);
  print("similar-file merge", g);
}
