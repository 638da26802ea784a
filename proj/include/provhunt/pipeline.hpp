#pragma once

// Record-file I/O shared by the CLI subcommands, and the end-to-end run:
// ingest -> reduce -> partition -> train|load -> index -> hunt ->
// reconstruct -> eval. Every stage persists its outputs in the work
// directory next to a stamp holding the hash of its configuration and
// input files; a rerun skips stages whose stamp still matches.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/eval.hpp"
#include "provhunt/hunt.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/intel.hpp"
#include "provhunt/partition.hpp"
#include "provhunt/reduce.hpp"
#include "provhunt/scenario.hpp"

namespace provhunt {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Line-delimited record helpers.

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Calls `fn(record, line_no)` for every non-blank line.
inline void for_each_record(const std::string& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, "<record>", path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      fn(j, line_no);
    } catch (const json::exception& e) {
      throw ParseError(line_no, "<record>", path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// Subgraphs: {id, edge_indices, t_start, t_end, text}.
inline std::string subgraphs_to_jsonl(std::span<const BehaviorSubgraph> subs, const ProvenanceGraph& g) {
  std::string out;
  for (const auto& s : subs) {
    ordered_json j;
    j["id"] = s.id;
    j["edge_indices"] = s.edge_indices;
    j["t_start"] = s.t_start;
    j["t_end"] = s.t_end;
    j["text"] = to_sequence(s, g).text;
    out += j.dump() + "\n";
  }
  return out;
}

/// Rebuilds a subgraph from its edge list; node set and times are derived.
inline BehaviorSubgraph subgraph_from_edges(std::size_t id, std::vector<std::size_t> edges, const ProvenanceGraph& g) {
  if (edges.empty()) throw ValidationError("subgraph " + std::to_string(id) + " has no edges");
  BehaviorSubgraph s;
  s.id = id;
  std::set<std::size_t> nodes;
  for (auto ei : edges) {
    if (ei >= g.edge_count())
      throw ValidationError("subgraph " + std::to_string(id) + " references edge " + std::to_string(ei) +
                            " outside the graph");
    nodes.insert(g.edge(ei).src);
    nodes.insert(g.edge(ei).dst);
  }
  std::sort(edges.begin(), edges.end());
  s.edge_indices = std::move(edges);
  s.node_indices.assign(nodes.begin(), nodes.end());
  s.t_start = g.edge(s.edge_indices.front()).ts;
  s.t_end = g.edge(s.edge_indices.back()).ts;
  return s;
}

// Verdicts: {subgraph_id, label, score, matched_text, is_attack,
// edge_indices, t_start, t_end}.
inline std::string verdicts_to_jsonl(std::span<const HuntResult> results) {
  std::string out;
  for (const auto& r : results) {
    ordered_json j;
    j["subgraph_id"] = r.verdict.subgraph_id;
    j["label"] = r.verdict.label;
    j["score"] = r.verdict.score;
    j["matched_text"] = r.verdict.matched_text;
    j["is_attack"] = r.verdict.is_attack;
    j["edge_indices"] = r.subgraph.edge_indices;
    j["t_start"] = r.subgraph.t_start;
    j["t_end"] = r.subgraph.t_end;
    out += j.dump() + "\n";
  }
  return out;
}

struct VerdictRecord {
  Verdict verdict;
  std::vector<std::size_t> edge_indices;
};

inline std::vector<VerdictRecord> load_verdicts(const std::string& path) {
  std::vector<VerdictRecord> out;
  for_each_record(path, [&](const json& j, std::size_t line) {
    VerdictRecord r;
    if (!j.contains("subgraph_id")) throw ParseError(line, "subgraph_id", "verdict line " + std::to_string(line) + ": missing subgraph_id");
    if (!j.contains("label")) throw ParseError(line, "label", "verdict line " + std::to_string(line) + ": missing label");
    r.verdict.subgraph_id = j.at("subgraph_id").get<std::size_t>();
    r.verdict.label = j.at("label").get<std::string>();
    r.verdict.score = j.value("score", 0.0);
    r.verdict.matched_text = j.value("matched_text", std::string());
    r.verdict.is_attack = r.verdict.label != kBenignLabel;
    r.edge_indices = j.value("edge_indices", std::vector<std::size_t>{});
    out.push_back(std::move(r));
  });
  return out;
}

/// Flagged subgraphs of a verdict file, resolved against `g`.
inline std::vector<FlaggedSubgraph> flagged_from_verdicts(std::span<const VerdictRecord> verdicts,
                                                          const ProvenanceGraph& g) {
  std::vector<FlaggedSubgraph> out;
  for (const auto& v : verdicts)
    if (v.verdict.is_attack)
      out.push_back({subgraph_from_edges(v.verdict.subgraph_id, v.edge_indices, g), v.verdict.label});
  return out;
}

// Labeled sequences: {text, label}. Training pairs: {sequence_text,
// intel_text, label}.
inline std::vector<LabeledSequence> load_labeled_sequences(const std::string& path) {
  std::vector<LabeledSequence> out;
  for_each_record(path, [&](const json& j, std::size_t line) {
    if (!j.contains("text")) throw ParseError(line, "text", "sequence line " + std::to_string(line) + ": missing text");
    LabeledSequence s{j.at("text").get<std::string>(), j.value("label", std::string(kBenignLabel))};
    if (!is_valid_label(s.label))
      throw ValidationError("sequence line " + std::to_string(line) + ": bad label '" + s.label + "'");
    out.push_back(std::move(s));
  });
  return out;
}

inline std::string labeled_sequences_to_jsonl(std::span<const LabeledSequence> seqs) {
  std::string out;
  for (const auto& s : seqs) {
    ordered_json j;
    j["text"] = s.text;
    j["label"] = s.label;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<TrainingPair> load_pairs(const std::string& path) {
  std::vector<TrainingPair> out;
  for_each_record(path, [&](const json& j, std::size_t line) {
    for (const char* f : {"sequence_text", "intel_text"})
      if (!j.contains(f) || !j[f].is_string())
        throw ParseError(line, f, "pairs line " + std::to_string(line) + ": missing '" + f + "'");
    out.push_back({j["sequence_text"].get<std::string>(), j["intel_text"].get<std::string>(),
                   j.value("label", std::string())});
  });
  return out;
}

inline std::string pairs_to_jsonl(std::span<const TrainingPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    ordered_json j;
    j["sequence_text"] = p.sequence_text;
    j["intel_text"] = p.intel_text;
    j["label"] = p.label;
    out += j.dump() + "\n";
  }
  return out;
}

/// Texts for `embed`: one {text} (optionally {id, text}) record per line.
inline std::vector<std::pair<std::string, std::string>> load_texts(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for_each_record(path, [&](const json& j, std::size_t line) {
    if (!j.contains("text") || !j["text"].is_string())
      throw ParseError(line, "text", "texts line " + std::to_string(line) + ": missing text");
    std::string id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                      : std::to_string(out.size());
    out.emplace_back(std::move(id), j["text"].get<std::string>());
  });
  return out;
}

inline std::string replay_to_jsonl(std::span<const std::pair<std::string, std::vector<std::string>>> rows) {
  std::string out;
  for (const auto& [orig, paras] : rows) {
    ordered_json j;
    j["original_text"] = orig;
    j["paraphrases"] = paras;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth: {"node": "type:id"} and/or {"subgraph_id": n} records.
// Graph-level truth is the listed subgraph ids; when none are listed it is
// every subgraph holding an edge whose endpoints are both truth nodes.

struct GroundTruth {
  std::set<NodeKey> nodes;
  std::set<std::size_t> subgraph_ids;
};

inline GroundTruth load_truth(const std::string& path) {
  GroundTruth t;
  for_each_record(path, [&](const json& j, std::size_t line) {
    bool any = false;
    if (j.contains("node")) {
      try {
        t.nodes.insert(NodeKey::parse(j["node"].get<std::string>()));
      } catch (const ValidationError& e) {
        throw ParseError(line, "node", "truth line " + std::to_string(line) + ": " + e.what());
      }
      any = true;
    }
    if (j.contains("subgraph_id")) {
      t.subgraph_ids.insert(j["subgraph_id"].get<std::size_t>());
      any = true;
    }
    if (!any) throw ParseError(line, "node", "truth line " + std::to_string(line) + ": needs node or subgraph_id");
  });
  return t;
}

inline std::string truth_to_jsonl(const std::set<NodeKey>& nodes) {
  std::string out;
  for (const auto& k : nodes) out += ordered_json{{"node", k.str()}}.dump() + "\n";
  return out;
}

struct EvalReport {
  MetricReport node;
  MetricReport graph;
  bool two_hop = false;
  std::size_t truth_nodes_unresolved = 0;
};

inline EvalReport evaluate(const ProvenanceGraph& g, std::span<const BehaviorSubgraph> subs,
                           std::span<const VerdictRecord> verdicts, const GroundTruth& truth, bool two_hop) {
  EvalReport r;
  r.two_hop = two_hop;
  auto truth_nodes = resolve_truth_nodes(truth.nodes, g);
  for (const auto& k : truth.nodes)
    if (!g.find(k)) ++r.truth_nodes_unresolved;
  // Merged nodes can stand for several keys; count keys without any match.
  if (r.truth_nodes_unresolved > 0) {
    std::size_t matched = 0;
    for (const auto& k : truth.nodes)
      if (!g.find(k) && !resolve_truth_nodes({k}, g).empty()) ++matched;
    r.truth_nodes_unresolved -= matched;
  }
  if (two_hop) truth_nodes = expand_2hop(truth_nodes, g);

  std::set<std::size_t> all_nodes;
  for (std::size_t i = 0; i < g.node_count(); ++i) all_nodes.insert(i);
  std::set<std::size_t> pred_nodes, pred_ids, all_ids;
  std::map<std::size_t, const BehaviorSubgraph*> by_id;
  for (const auto& s : subs) {
    all_ids.insert(s.id);
    by_id[s.id] = &s;
  }
  for (const auto& v : verdicts) {
    if (!v.verdict.is_attack) continue;
    pred_ids.insert(v.verdict.subgraph_id);
    for (auto ei : v.edge_indices) {
      pred_nodes.insert(g.edge(ei).src);
      pred_nodes.insert(g.edge(ei).dst);
    }
  }
  r.node = node_metrics(pred_nodes, truth_nodes, all_nodes);

  std::set<std::size_t> truth_ids = truth.subgraph_ids;
  if (truth_ids.empty()) {
    const auto base = resolve_truth_nodes(truth.nodes, g);
    for (const auto& s : subs)
      for (auto ei : s.edge_indices)
        if (base.count(g.edge(ei).src) && base.count(g.edge(ei).dst)) {
          truth_ids.insert(s.id);
          break;
        }
  }
  r.graph = graph_metrics(pred_ids, truth_ids, all_ids);
  return r;
}

inline std::string report_to_jsonl(const EvalReport& r) {
  std::string out;
  for (auto [level, m] : {std::pair{"node", &r.node}, std::pair{"graph", &r.graph}}) {
    ordered_json j;
    j["level"] = level;
    j["two_hop"] = r.two_hop;
    j["tp"] = m->tp;
    j["fp"] = m->fp;
    j["fn"] = m->fn;
    j["tn"] = m->tn;
    j["precision"] = format_percent(m->precision);
    j["recall"] = format_percent(m->recall);
    j["accuracy"] = format_percent(m->accuracy);
    j["fpr"] = format_percent(m->fpr);
    j["precision_undefined"] = m->precision_undefined;
    j["recall_undefined"] = m->recall_undefined;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration.

struct TrainingInputs {
  std::string pairs;           // ready-made pairs; wins over the fields below
  std::string sequences;       // labeled sequences
  std::string intel;           // query-db format
  std::string augment_replay;  // optional paraphrase replay file
};

struct PipelineConfig {
  std::string input;
  std::string workdir = "provhunt-out";
  bool lenient = false;
  std::uint64_t seed = 0;
  ReduceConfig reduce;
  Nanos theta_max = kDefaultThetaMax;
  EncoderConfig encoder;
  TrainConfig train;
  std::size_t n_aug = 3;
  double benign_sample_rate = 1.0;
  std::string params;  // pretrained parameters; skips training when set
  TrainingInputs training;
  std::string query_db;
  std::string query_embeddings;  // optional PEMB1 rows aligned to query_db
  std::string truth;
  bool two_hop = false;
  std::optional<double> min_score;

  void validate() const {
    if (input.empty()) throw ValidationError("config: input is required");
    if (query_db.empty()) throw ValidationError("config: query_db is required");
    if (params.empty() && training.pairs.empty() && (training.sequences.empty() || training.intel.empty()))
      throw ValidationError("config: need params, training.pairs, or training.sequences + training.intel");
    if (theta_max <= 0) throw ValidationError("config: theta_max must be positive");
    if (!(benign_sample_rate > 0.0 && benign_sample_rate <= 1.0))
      throw ValidationError("config: benign_sample_rate must be in (0, 1]");
    if (encoder.dim == 0 || encoder.out_dim == 0) throw ValidationError("config: encoder dims must be positive");
    reduce.validate();
    if (params.empty()) train.validate();
  }

  ordered_json to_json() const {
    ordered_json j;
    j["input"] = input;
    j["workdir"] = workdir;
    j["lenient"] = lenient;
    j["seed"] = seed;
    j["reduce"] = {{"net_window_ns", reduce.net_window_ns},
                   {"cascade_window_ns", reduce.cascade_window_ns},
                   {"file_window_ns", reduce.file_window_ns},
                   {"sim_threshold", reduce.sim_threshold}};
    j["theta_max_ns"] = theta_max;
    j["encoder"] = {{"dim", encoder.dim},
                    {"out_dim", encoder.out_dim},
                    {"buckets", encoder.buckets},
                    {"shared_projection", encoder.shared_projection}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"epochs", train.epochs},
                  {"learning_rate", train.learning_rate},
                  {"dropout", train.dropout}};
    j["n_aug"] = n_aug;
    j["benign_sample_rate"] = benign_sample_rate;
    j["params"] = params;
    j["training"] = {{"pairs", training.pairs},
                     {"sequences", training.sequences},
                     {"intel", training.intel},
                     {"augment_replay", training.augment_replay}};
    j["query_db"] = query_db;
    j["query_embeddings"] = query_embeddings;
    j["truth"] = truth;
    j["two_hop"] = two_hop;
    j["min_score"] = min_score ? json(*min_score) : json(nullptr);
    return j;
  }
};

namespace detail {

inline Nanos duration_field(const json& j, const char* key, Nanos fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j[key];
  if (v.is_number_integer()) return v.get<Nanos>();
  if (v.is_string()) return parse_duration(v.get<std::string>());
  throw ValidationError(std::string("config: '") + key + "' must be a duration string or integer nanoseconds");
}

inline std::string path_field(const json& j, const char* key, const fs::path& base, const std::string& fallback = {}) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  auto s = j[key].get<std::string>();
  if (s.empty()) return s;
  fs::path p(s);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

}  // namespace detail

/// Reads a config object. Durations accept "20m"/"1s"/"500ms" or integer
/// nanoseconds; relative paths resolve against `base`.
inline PipelineConfig config_from_json(const json& j, const fs::path& base = {}) {
  PipelineConfig c;
  try {
    c.input = detail::path_field(j, "input", base);
    c.workdir = detail::path_field(j, "workdir", base, c.workdir);
    c.lenient = j.value("lenient", c.lenient);
    c.seed = j.value("seed", c.seed);
    if (j.contains("reduce")) {
      const auto& r = j["reduce"];
      c.reduce.net_window_ns = detail::duration_field(r, "net_window", c.reduce.net_window_ns);
      c.reduce.cascade_window_ns = detail::duration_field(r, "cascade_window", c.reduce.cascade_window_ns);
      c.reduce.file_window_ns = detail::duration_field(r, "file_window", c.reduce.file_window_ns);
      c.reduce.sim_threshold = r.value("sim", c.reduce.sim_threshold);
    }
    c.theta_max = detail::duration_field(j, "theta_max", c.theta_max);
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      c.encoder.dim = e.value("dim", c.encoder.dim);
      c.encoder.out_dim = e.value("out_dim", c.encoder.out_dim);
      c.encoder.buckets = e.value("buckets", c.encoder.buckets);
      c.encoder.shared_projection = e.value("shared_projection", c.encoder.shared_projection);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.dropout = t.value("dropout", c.train.dropout);
    }
    c.n_aug = j.value("n_aug", c.n_aug);
    c.benign_sample_rate = j.value("benign_sample_rate", c.benign_sample_rate);
    c.params = detail::path_field(j, "params", base);
    if (j.contains("training")) {
      const auto& t = j["training"];
      c.training.pairs = detail::path_field(t, "pairs", base);
      c.training.sequences = detail::path_field(t, "sequences", base);
      c.training.intel = detail::path_field(t, "intel", base);
      c.training.augment_replay = detail::path_field(t, "augment_replay", base);
    }
    c.query_db = detail::path_field(j, "query_db", base);
    c.query_embeddings = detail::path_field(j, "query_embeddings", base);
    c.truth = detail::path_field(j, "truth", base);
    c.two_hop = j.value("two_hop", c.two_hop);
    if (j.contains("min_score") && !j["min_score"].is_null()) c.min_score = j["min_score"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.train.seed = c.seed;
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_bytes(path));
  } catch (const json::parse_error& e) {
    throw ParseError(0, "<config>", "config " + path + ": " + e.what());
  }
  return config_from_json(j, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Run.

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what, std::vector<std::string> artifacts)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)),
        artifacts_(std::move(artifacts)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::vector<std::string>& artifacts() const noexcept { return artifacts_; }

 private:
  std::string stage_;
  std::vector<std::string> artifacts_;
};

struct PipelineArtifacts {
  std::string graph, reduced, reduce_report, subgraphs, pairs, params, train_log, index, verdicts, scenario_dot,
      scenario_jsonl, report;
  std::vector<std::string> ran;      // stages executed
  std::vector<std::string> skipped;  // stages found up to date
  std::vector<std::string> warnings;
};

using PipelineLog = std::function<void(const std::string&)>;

namespace detail {

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class StageRunner {
 public:
  StageRunner(fs::path workdir, PipelineArtifacts& art, PipelineLog log)
      : dir_(std::move(workdir)), art_(art), log_(std::move(log)) {}

  /// Runs `fn` unless the stamp for `name` matches the hash of
  /// (`config`, contents of `inputs`) and every output exists.
  void run(const std::string& name, const std::string& config, const std::vector<std::string>& inputs,
           const std::vector<std::string>& outputs, const std::function<void()>& fn) {
    try {
      std::uint64_t h = fnv1a(name);
      h = fnv1a(config, h);
      for (const auto& in : inputs) h = fnv1a(read_file_bytes(in), fnv1a(in, h));
      const auto stamp = (dir_ / ("." + name + ".stamp")).string();
      const auto key = hex64(h);
      bool fresh = fs::exists(stamp);
      for (const auto& o : outputs) fresh = fresh && fs::exists(o);
      if (fresh && read_file_bytes(stamp) == key) {
        art_.skipped.push_back(name);
        if (log_) log_(name + ": up to date");
        return;
      }
      if (log_) log_(name + ": running");
      fn();
      write_file_bytes(stamp, key);
      art_.ran.push_back(name);
      for (const auto& o : outputs) produced_.push_back(o);
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(name, e.what(), produced_);
    }
  }

  void note_existing(const std::vector<std::string>& outputs) {
    for (const auto& o : outputs) produced_.push_back(o);
  }

 private:
  fs::path dir_;
  PipelineArtifacts& art_;
  PipelineLog log_;
  std::vector<std::string> produced_;
};

}  // namespace detail

/// Turns training inputs into pairs: augment the intelligence, then pair
/// labeled sequences with it.
inline std::vector<TrainingPair> assemble_pairs(const PipelineConfig& cfg, Diagnostics* diag) {
  if (!cfg.training.pairs.empty()) return load_pairs(cfg.training.pairs);
  const auto seqs = load_labeled_sequences(cfg.training.sequences);
  auto intel_load = load_query_db(cfg.training.intel);
  if (!intel_load.issues.empty())
    throw ValidationError(cfg.training.intel + ":" + std::to_string(intel_load.issues.front().line) + ": " +
                          intel_load.issues.front().message);
  auto intel = intel_load.db.entries;
  if (!cfg.training.augment_replay.empty() && cfg.n_aug > 0) {
    const auto replay = ReplayAugmenter::load(cfg.training.augment_replay);
    intel = augment_intelligence(intel, cfg.n_aug, replay, diag);
  }
  return build_pairs(seqs, intel, cfg.benign_sample_rate, cfg.seed, diag);
}

inline QueryDB load_query_db_strict(const std::string& path, Diagnostics* diag) {
  auto load = load_query_db(path);
  for (const auto& issue : load.issues)
    if (diag) diag->warn(path + ":" + std::to_string(issue.line) + ": " + issue.message);
  for (const auto& w : load.warnings)
    if (diag) diag->warn(path + ": " + w);
  return std::move(load.db);
}

inline PipelineArtifacts run_pipeline(const PipelineConfig& cfg, const PipelineLog& log = {}) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw PipelineError("config", e.what(), {});
  }
  const fs::path dir(cfg.workdir);
  fs::create_directories(dir);
  PipelineArtifacts art;
  auto at = [&](const char* name) { return (dir / name).string(); };
  art.graph = at("graph.bin");
  art.reduced = at("reduced.bin");
  art.reduce_report = at("reduce_report.jsonl");
  art.subgraphs = at("subgraphs.jsonl");
  art.index = at("index.pemb");
  art.verdicts = at("verdicts.jsonl");
  art.scenario_dot = at("scenario.dot");
  art.scenario_jsonl = at("scenario.jsonl");
  detail::StageRunner stages(dir, art, log);
  Diagnostics diag;
  const auto cj = cfg.to_json();

  stages.run("ingest", cj["lenient"].dump(), {cfg.input}, {art.graph}, [&] {
    auto res = EventReader::read_file(cfg.input, cfg.lenient);
    for (const auto& issue : res.issues)
      diag.warn(cfg.input + ":" + std::to_string(issue.line) + ": " + issue.message);
    save_graph(art.graph, build_graph(res.events));
  });

  stages.run("reduce", cj["reduce"].dump(), {art.graph}, {art.reduced, art.reduce_report}, [&] {
    ReduceReport rep;
    const auto g = reduce_all(load_graph(art.graph), cfg.reduce, &rep);
    save_graph(art.reduced, g);
    std::string out;
    for (const auto& s : rep.steps) {
      ordered_json j{{"rule", s.rule},
                     {"nodes_before", s.nodes_before},
                     {"nodes_after", s.nodes_after},
                     {"edges_before", s.edges_before},
                     {"edges_after", s.edges_after}};
      out += j.dump() + "\n";
    }
    for (const auto& w : rep.warnings) out += ordered_json{{"warning", w}}.dump() + "\n";
    write_file_bytes(art.reduce_report, out);
  });

  stages.run("partition", cj["theta_max_ns"].dump(), {art.reduced}, {art.subgraphs}, [&] {
    const auto g = load_graph(art.reduced);
    write_file_bytes(art.subgraphs, subgraphs_to_jsonl(partition(g, cfg.theta_max), g));
  });

  if (!cfg.params.empty()) {
    art.params = cfg.params;
    if (!fs::exists(art.params)) throw PipelineError("train", "params file not found: " + art.params, {});
  } else {
    art.pairs = at("pairs.jsonl");
    art.params = at("params.bin");
    art.train_log = at("train_loss.jsonl");
    std::vector<std::string> inputs;
    for (const auto* p : {&cfg.training.pairs, &cfg.training.sequences, &cfg.training.intel,
                          &cfg.training.augment_replay})
      if (!p->empty()) inputs.push_back(*p);
    const std::string tcfg = cj["train"].dump() + cj["encoder"].dump() + cj["seed"].dump() + cj["n_aug"].dump() +
                             cj["benign_sample_rate"].dump();
    stages.run("train", tcfg, inputs, {art.pairs, art.params, art.train_log}, [&] {
      const auto pairs = assemble_pairs(cfg, &diag);
      write_file_bytes(art.pairs, pairs_to_jsonl(pairs));
      const auto text_pairs = to_text_pairs(pairs);
      auto init = init_params(cfg.encoder, build_vocabulary(text_pairs, cfg.encoder.buckets), cfg.seed);
      std::string losses;
      auto res = train(text_pairs, cfg.train, std::move(init), [&](std::size_t epoch, double loss) {
        losses += ordered_json{{"epoch", epoch + 1}, {"loss", loss}}.dump() + "\n";
        if (log && ((epoch + 1) % 10 == 0 || epoch == 0))
          log("train: epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
      });
      save_params(art.params, res.params);
      write_file_bytes(art.train_log, losses);
    });
  }

  std::vector<std::string> index_inputs{art.params, cfg.query_db};
  if (!cfg.query_embeddings.empty()) index_inputs.push_back(cfg.query_embeddings);
  stages.run("index", "", index_inputs, {art.index}, [&] {
    const auto db = load_query_db_strict(cfg.query_db, &diag);
    QueryIndex idx;
    if (!cfg.query_embeddings.empty()) {
      idx = build_index(db, load_external_embeddings(cfg.query_embeddings,
                                                     static_cast<std::uint32_t>(cfg.encoder.out_dim)));
    } else {
      idx = build_index(db, load_params(art.params));
    }
    save_embeddings(art.index, index_to_table(idx));
  });

  stages.run("hunt", cj["theta_max_ns"].dump() + cj["min_score"].dump(), {art.reduced, art.index, art.params},
             {art.verdicts}, [&] {
               const auto g = load_graph(art.reduced);
               const auto params = load_params(art.params);
               const auto idx = index_from_table(load_embeddings(art.index));
               HuntOptions opts;
               opts.min_score = cfg.min_score;
               const auto results = hunt(g, cfg.theta_max, idx, params, opts, &diag);
               write_file_bytes(art.verdicts, verdicts_to_jsonl(results));
             });

  stages.run("reconstruct", "", {art.reduced, art.verdicts}, {art.scenario_dot, art.scenario_jsonl}, [&] {
    const auto g = load_graph(art.reduced);
    const auto verdicts = load_verdicts(art.verdicts);
    const auto ag = reconstruct(flagged_from_verdicts(verdicts, g), g);
    for (const auto& w : ag.warnings) diag.warn(w);
    write_file_bytes(art.scenario_dot, export_dot(ag));
    write_file_bytes(art.scenario_jsonl, export_jsonl(ag));
  });

  if (!cfg.truth.empty()) {
    art.report = at("report.jsonl");
    stages.run("eval", cj["two_hop"].dump() + cj["theta_max_ns"].dump(), {art.reduced, art.verdicts, cfg.truth},
               {art.report}, [&] {
                 const auto g = load_graph(art.reduced);
                 const auto subs = partition(g, cfg.theta_max);
                 const auto rep = evaluate(g, subs, load_verdicts(art.verdicts), load_truth(cfg.truth), cfg.two_hop);
                 write_file_bytes(art.report, report_to_jsonl(rep));
               });
  }
  art.warnings = std::move(diag.warnings);
  return art;
}

}  // namespace provhunt
