#pragma once

#include <zlib.h>

#include <fstream>
#include <limits>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/common.hpp"
#include "provhunt/graph.hpp"

namespace provhunt {

/// One audit record in the canonical line-delimited format.
struct Event {
  Nanos ts = 0;
  std::string src_id;
  NodeType src_type{};
  std::string src_name;
  std::string op;
  std::string dst_id;
  NodeType dst_type{};
  std::string dst_name;

  NodeRecord src() const { return NodeRecord{src_type, src_id, src_name}; }
  NodeRecord dst() const { return NodeRecord{dst_type, dst_id, dst_name}; }

  friend bool operator==(const Event&, const Event&) = default;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& rec, const char* field,
                                           std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end())
    throw ParseError(line, field, "line " + std::to_string(line) + ": missing field '" + field + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* field, std::size_t line) {
  const auto& v = require_field(rec, field, line);
  if (!v.is_string())
    throw ParseError(line, field, "line " + std::to_string(line) + ": field '" + field + "' is not a string");
  return v.get<std::string>();
}

inline NodeType require_type(const nlohmann::json& rec, const char* field, std::size_t line) {
  auto s = require_string(rec, field, line);
  auto t = node_type_from_string(s);
  if (!t)
    throw ValidationError("line " + std::to_string(line) + ": field '" + field +
                          "' has unknown node type '" + s + "'");
  return *t;
}

}  // namespace detail

/// Parses one canonical record. `line` is only used for diagnostics.
/// Throws ParseError for malformed records, ValidationError for values
/// outside the domain.
inline Event parse_event_line(std::string_view text, std::size_t line = 0) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, "<record>", "line " + std::to_string(line) + ": " + e.what());
  }
  if (!rec.is_object())
    throw ParseError(line, "<record>", "line " + std::to_string(line) + ": record is not an object");

  Event ev;
  const auto& ts = detail::require_field(rec, "ts", line);
  if (!ts.is_number_integer())
    throw ParseError(line, "ts", "line " + std::to_string(line) + ": field 'ts' is not an integer");
  ev.ts = ts.get<Nanos>();
  if (ev.ts < 0) throw ValidationError("line " + std::to_string(line) + ": negative ts");
  ev.src_id = detail::require_string(rec, "src_id", line);
  ev.src_type = detail::require_type(rec, "src_type", line);
  ev.src_name = detail::require_string(rec, "src_name", line);
  ev.op = detail::require_string(rec, "op", line);
  ev.dst_id = detail::require_string(rec, "dst_id", line);
  ev.dst_type = detail::require_type(rec, "dst_type", line);
  ev.dst_name = detail::require_string(rec, "dst_name", line);
  if (ev.op.empty()) throw ValidationError("line " + std::to_string(line) + ": empty op");
  if (ev.src_type == ev.dst_type && ev.src_id == ev.dst_id && ev.src_type != NodeType::process)
    throw ValidationError("line " + std::to_string(line) + ": self-referential event on a non-process node");
  return ev;
}

inline std::string event_to_json(const Event& ev) {
  nlohmann::ordered_json j;
  j["ts"] = ev.ts;
  j["src_id"] = ev.src_id;
  j["src_type"] = to_string(ev.src_type);
  j["src_name"] = ev.src_name;
  j["op"] = ev.op;
  j["dst_id"] = ev.dst_id;
  j["dst_type"] = to_string(ev.dst_type);
  j["dst_name"] = ev.dst_name;
  return j.dump();
}

struct IngestIssue {
  std::size_t line = 0;
  std::string field;
  std::string message;
};

struct IngestResult {
  std::vector<Event> events;
  std::vector<IngestIssue> issues;
};

/// Reads a line-delimited stream of records; gzip input is detected and
/// inflated transparently. Blank lines are skipped. In strict mode the first
/// bad record throws; in lenient mode it is reported and skipped.
class EventReader {
 public:
  static IngestResult read_file(const std::string& path, bool lenient) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw std::runtime_error("cannot open input: " + path);
    std::unique_ptr<gzFile_s, int (*)(gzFile)> guard(f, gzclose);
    IngestResult out;
    std::string pending;
    std::vector<char> buf(1 << 16);
    std::size_t line_no = 0;
    for (;;) {
      const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
      if (n < 0) {
        int err = 0;
        throw std::runtime_error(std::string("read error: ") + gzerror(f, &err));
      }
      if (n == 0) break;
      pending.append(buf.data(), static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1)
        consume(std::string_view(pending).substr(start, nl - start), ++line_no, lenient, out);
      pending.erase(0, start);
    }
    if (!pending.empty()) consume(pending, ++line_no, lenient, out);
    return out;
  }

  static IngestResult read_stream(std::istream& in, bool lenient) {
    IngestResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) consume(line, ++line_no, lenient, out);
    return out;
  }

 private:
  static void consume(std::string_view line, std::size_t line_no, bool lenient, IngestResult& out) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      out.events.push_back(parse_event_line(line, line_no));
    } catch (const ParseError& e) {
      if (!lenient) throw;
      out.issues.push_back({line_no, e.field(), e.what()});
    } catch (const ValidationError& e) {
      if (!lenient) throw;
      out.issues.push_back({line_no, "", e.what()});
    }
  }
};

/// One node per distinct (type, id); one edge per event. Input order does
/// not matter.
inline ProvenanceGraph build_graph(std::span<const Event> events) {
  GraphBuilder b;
  b.reserve(events.size());
  for (const auto& ev : events) b.add_edge(ev.src(), ev.dst(), ev.op, ev.ts);
  return std::move(b).build();
}

/// Inverse of build_graph: one canonical event per edge, in edge order.
inline std::vector<Event> graph_to_events(const ProvenanceGraph& g) {
  std::vector<Event> out;
  out.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    const auto& s = g.src_of(e);
    const auto& d = g.dst_of(e);
    out.push_back(Event{e.ts, s.id, s.type, s.name, e.op, d.id, d.type, d.name});
  }
  return out;
}

// Snapshot format:
//   "PROVG1" | u32 version(=1) | u64 node_count
//   node*: u8 type | str id | str name
//   u64 edge_count
//   edge*: u64 src | u64 dst | str op | i64 ts
// Strings are u32 length + bytes; all integers little-endian.
inline constexpr std::string_view kGraphMagic = "PROVG1";
inline constexpr std::uint32_t kGraphVersion = 1;

inline void write_graph(std::ostream& out, const ProvenanceGraph& g) {
  out.write(kGraphMagic.data(), kGraphMagic.size());
  bin::write_le<std::uint32_t>(out, kGraphVersion);
  bin::write_le<std::uint64_t>(out, g.node_count());
  for (const auto& n : g.nodes()) {
    bin::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(n.type));
    bin::write_string(out, n.id);
    bin::write_string(out, n.name);
  }
  bin::write_le<std::uint64_t>(out, g.edge_count());
  for (const auto& e : g.edges()) {
    bin::write_le<std::uint64_t>(out, e.src);
    bin::write_le<std::uint64_t>(out, e.dst);
    bin::write_string(out, e.op);
    bin::write_le<std::int64_t>(out, e.ts);
  }
}

inline ProvenanceGraph read_graph(std::istream& in) {
  bin::expect_magic(in, kGraphMagic);
  const auto version = bin::read_le<std::uint32_t>(in, "version");
  if (version != kGraphVersion) throw FormatError("unsupported graph version " + std::to_string(version));
  const auto n_nodes = bin::read_le<std::uint64_t>(in, "node count");
  std::vector<NodeRecord> nodes;
  nodes.reserve(std::min<std::uint64_t>(n_nodes, 1u << 20));
  for (std::uint64_t i = 0; i < n_nodes; ++i) {
    const auto t = bin::read_le<std::uint8_t>(in, "node type");
    if (t > 2) throw FormatError("bad node type tag");
    NodeRecord r;
    r.type = static_cast<NodeType>(t);
    r.id = bin::read_string(in, "node id");
    r.name = bin::read_string(in, "node name");
    nodes.push_back(std::move(r));
  }
  const auto n_edges = bin::read_le<std::uint64_t>(in, "edge count");
  GraphBuilder b;
  b.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n_edges, 1u << 24)));
  for (const auto& n : nodes) b.add_node(n, std::numeric_limits<Nanos>::min());
  for (std::uint64_t i = 0; i < n_edges; ++i) {
    const auto s = bin::read_le<std::uint64_t>(in, "edge src");
    const auto d = bin::read_le<std::uint64_t>(in, "edge dst");
    auto op = bin::read_string(in, "edge op");
    const auto ts = bin::read_le<std::int64_t>(in, "edge ts");
    if (s >= nodes.size() || d >= nodes.size()) throw FormatError("edge endpoint out of range");
    b.add_edge(nodes[s], nodes[d], std::move(op), ts);
  }
  return std::move(b).build();
}

inline void save_graph(const std::string& path, const ProvenanceGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_graph(out, g);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ProvenanceGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open graph: " + path);
  return read_graph(in);
}

}  // namespace provhunt
