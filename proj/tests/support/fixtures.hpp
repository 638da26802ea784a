#pragma once

#include <string>
#include <vector>

#include "provhunt/embed.hpp"
#include "provhunt/ingest.hpp"

namespace fixture {

using provhunt::Event;
using provhunt::Nanos;
using provhunt::NodeType;

inline Event ev(Nanos ts, std::string src_id, NodeType st, std::string src_name, std::string op, std::string dst_id,
                NodeType dt, std::string dst_name) {
  return Event{ts, std::move(src_id), st, std::move(src_name), std::move(op), std::move(dst_id), dt,
               std::move(dst_name)};
}

inline Event proc_to(Nanos ts, const std::string& pid, const std::string& pname, const std::string& op,
                     NodeType dt, const std::string& name) {
  return ev(ts, pid, NodeType::process, pname, op, name, dt, name);
}

inline constexpr Nanos kS = provhunt::kNanosPerSecond;
inline constexpr Nanos k220608 = (22 * 3600 + 6 * 60 + 8) * kS;

/// Mail client trace with the three kinds of redundancy: a connect and a
/// read to the same host within a second, a directory cascade, and two
/// similarly named lock files in one folder.
inline std::vector<Event> mail_client_events() {
  const auto S = NodeType::socket, F = NodeType::file;
  return {
      proc_to(k220608, "p1", "alpine", "connect", S, "127.0.0.1:1"),
      proc_to(k220608 + 300'000'000, "p1", "alpine", "read", S, "127.0.0.1:25"),
      proc_to(k220608 + 1 * kS, "p1", "alpine", "read", F, "/usr/home/user"),
      proc_to(k220608 + 2 * kS, "p1", "alpine", "read", F, "/usr/home/user/mail"),
      proc_to(k220608 + 3 * kS, "p1", "alpine", "write", F, "/usr/home/user/mail/sent"),
      proc_to(k220608 + 4 * kS, "p1", "alpine", "write", F, "/mail/msg.1001.lock"),
      proc_to(k220608 + 5 * kS, "p1", "alpine", "write", F, "/mail/msg.1002.lock"),
  };
}

/// Random events over a fixed entity pool.
inline std::vector<Event> random_events(provhunt::Rng& rng, std::size_t processes, std::size_t files,
                                        std::size_t sockets, std::size_t edges, Nanos span) {
  static const char* ops[] = {"read", "write", "open", "execute", "connect", "clone"};
  std::vector<Event> out;
  out.reserve(edges);
  auto pname = [](std::size_t i) { return "proc" + std::to_string(i % 7); };
  for (std::size_t k = 0; k < edges; ++k) {
    const std::size_t p = rng.below(processes);
    const Nanos ts = static_cast<Nanos>(rng.below(static_cast<std::size_t>(span)));
    const auto kind = rng.below(3);
    if (kind == 0 || (kind == 2 && sockets == 0)) {
      const std::size_t f = rng.below(files);
      out.push_back(ev(ts, "p" + std::to_string(p), NodeType::process, pname(p), ops[rng.below(4)],
                       "f" + std::to_string(f), NodeType::file, "/d" + std::to_string(f % 5) + "/f" + std::to_string(f)));
    } else if (kind == 1) {
      std::size_t q = rng.below(processes);
      if (q == p) q = (q + 1) % processes;
      out.push_back(ev(ts, "p" + std::to_string(p), NodeType::process, pname(p), "clone", "p" + std::to_string(q),
                       NodeType::process, pname(q)));
    } else {
      const std::size_t s = rng.below(sockets);
      out.push_back(ev(ts, "p" + std::to_string(p), NodeType::process, pname(p), "connect", "s" + std::to_string(s),
                       NodeType::socket, "10.0.0." + std::to_string(s % 9) + ":" + std::to_string(80 + s)));
    }
  }
  return out;
}

}  // namespace fixture
