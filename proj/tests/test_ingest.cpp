#include <gtest/gtest.h>

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "provhunt/ingest.hpp"
#include "support/fixtures.hpp"

using namespace provhunt;

namespace {

const char* kNginxLine =
    R"({"ts":1000,"src_id":"p1","src_type":"process","src_name":"nginx","op":"connect","dst_id":"s1","dst_type":"socket","dst_name":"78.205.235.65:80"})";

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("provhunt_ingest_" + name)).string();
}

}  // namespace

TEST(ParseEventLine, FieldMapping) {
  const auto e = parse_event_line(kNginxLine, 1);
  EXPECT_EQ(e.ts, 1000);
  EXPECT_EQ(e.src_id, "p1");
  EXPECT_EQ(e.src_type, NodeType::process);
  EXPECT_EQ(e.src_name, "nginx");
  EXPECT_EQ(e.op, "connect");
  EXPECT_EQ(e.dst_id, "s1");
  EXPECT_EQ(e.dst_type, NodeType::socket);
  EXPECT_EQ(e.dst_name, "78.205.235.65:80");
}

TEST(ParseEventLine, ExtraFieldsIgnored) {
  std::string line = kNginxLine;
  line.insert(1, R"("host":"h1","pid":7,)");
  EXPECT_EQ(parse_event_line(line).ts, 1000);
}

TEST(ParseEventLine, MissingOpNamesField) {
  std::string line = kNginxLine;
  line.erase(line.find(R"("op":"connect",)"), std::string(R"("op":"connect",)").size());
  try {
    parse_event_line(line, 12);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "op");
    EXPECT_EQ(e.line(), 12u);
    EXPECT_NE(std::string(e.what()).find("op"), std::string::npos);
  }
}

TEST(ParseEventLine, Rejections) {
  std::string bad_type = kNginxLine;
  bad_type.replace(bad_type.find("\"socket\""), 8, "\"pipe\"");
  EXPECT_THROW(parse_event_line(bad_type), ValidationError);
  std::string neg = kNginxLine;
  neg.replace(neg.find("1000"), 4, "-5");
  EXPECT_THROW(parse_event_line(neg), ValidationError);
  std::string str_ts = kNginxLine;
  str_ts.replace(str_ts.find("1000"), 4, "\"1000\"");
  EXPECT_THROW(parse_event_line(str_ts), ParseError);
  EXPECT_THROW(parse_event_line("{not json"), ParseError);
  EXPECT_THROW(parse_event_line("[1,2]"), ParseError);
}

TEST(ParseEventLine, SelfReference) {
  const auto exec = fixture::ev(5, "p1", NodeType::process, "sh", "exec", "p1", NodeType::process, "sh");
  EXPECT_EQ(parse_event_line(event_to_json(exec)), exec);
  const auto file_loop = fixture::ev(5, "f1", NodeType::file, "/a", "link", "f1", NodeType::file, "/a");
  EXPECT_THROW(parse_event_line(event_to_json(file_loop)), ValidationError);
}

TEST(EventReader, LenientCountsOneBadLine) {
  std::ostringstream src;
  for (int i = 0; i < 10'000; ++i) {
    if (i == 4321) {
      src << R"({"ts":1,"src_id":"p1"})" << '\n';
      continue;
    }
    std::string line = kNginxLine;
    line.replace(line.find("1000"), 4, std::to_string(i));
    src << line << '\n';
  }
  std::istringstream in(src.str());
  const auto res = EventReader::read_stream(in, true);
  EXPECT_EQ(res.events.size(), 9'999u);
  ASSERT_EQ(res.issues.size(), 1u);
  EXPECT_EQ(res.issues[0].line, 4322u);
  EXPECT_EQ(res.issues[0].field, "src_type");

  std::istringstream strict(src.str());
  EXPECT_THROW(EventReader::read_stream(strict, false), ParseError);
}

TEST(EventReader, PlainAndGzipFiles) {
  const auto plain = temp_path("plain.jsonl");
  const auto gz = temp_path("events.jsonl.gz");
  std::string body = std::string(kNginxLine) + "\n\n" + kNginxLine;  // no trailing newline
  {
    std::ofstream(plain) << body;
    gzFile f = gzopen(gz.c_str(), "wb");
    gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
    gzclose(f);
  }
  EXPECT_EQ(EventReader::read_file(plain, false).events.size(), 2u);
  EXPECT_EQ(EventReader::read_file(gz, false).events.size(), 2u);
  EXPECT_THROW(EventReader::read_file(temp_path("missing.jsonl"), false), std::runtime_error);
  std::filesystem::remove(plain);
  std::filesystem::remove(gz);
}

TEST(BuildGraph, EmptyAndShared) {
  const auto empty = build_graph(std::vector<Event>{});
  EXPECT_EQ(empty.node_count(), 0u);
  EXPECT_EQ(empty.edge_count(), 0u);

  std::vector<Event> two{
      fixture::proc_to(1, "p1", "cat", "read", NodeType::file, "f1"),
      fixture::proc_to(2, "p1", "cat", "write", NodeType::file, "f2"),
  };
  const auto g = build_graph(two);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
}

TEST(BuildGraph, IdentityIsTypeAndId) {
  // Same id, different types: two nodes. Same (type, id), different names: one.
  std::vector<Event> evs{
      fixture::ev(1, "x", NodeType::process, "a", "read", "x", NodeType::file, "/x"),
      fixture::ev(2, "x", NodeType::process, "b", "write", "y", NodeType::file, "/y"),
  };
  const auto g = build_graph(evs);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.node(*g.find({NodeType::process, "x"})).name, "a");
}

TEST(BuildGraph, SortedAndPermutationInvariant) {
  Rng rng(17);
  auto evs = fixture::random_events(rng, 20, 20, 10, 1000, 500);
  const auto g = build_graph(evs);
  EXPECT_EQ(g.edge_count(), 1000u);
  EXPECT_LE(g.node_count(), 50u);
  // Sort oracle: the edge list is the events sorted by (ts, src_name, op, dst_name).
  std::vector<std::tuple<Nanos, std::string, std::string, std::string>> want, got;
  for (const auto& e : evs) want.emplace_back(e.ts, e.src_name, e.op, e.dst_name);
  std::sort(want.begin(), want.end());
  for (const auto& e : g.edges()) got.emplace_back(e.ts, g.src_of(e).name, e.op, g.dst_of(e).name);
  EXPECT_EQ(got, want);
  for (std::size_t i = 1; i < g.edge_count(); ++i) EXPECT_LE(g.edge(i - 1).ts, g.edge(i).ts);

  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(evs);
    EXPECT_EQ(build_graph(evs), g);
  }
}

TEST(BuildGraph, EventRoundTrip) {
  Rng rng(3);
  const auto g = build_graph(fixture::random_events(rng, 10, 10, 5, 300, 100));
  EXPECT_EQ(build_graph(graph_to_events(g)), g);
}

TEST(GraphSnapshot, RoundTripAndErrors) {
  Rng rng(5);
  const auto g = build_graph(fixture::random_events(rng, 10, 10, 5, 300, 100));
  std::stringstream ss;
  write_graph(ss, g);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 6), "PROVG1");
  std::istringstream in(bytes);
  EXPECT_EQ(read_graph(in), g);

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_graph(truncated), FormatError);
  std::istringstream wrong("PROVG2" + bytes.substr(6));
  EXPECT_THROW(read_graph(wrong), FormatError);
}
