// provhunt command-line front end. Exit codes: 0 ok, 1 usage, 2 data.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "provhunt/provhunt.hpp"

namespace fs = std::filesystem;
using namespace provhunt;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  bool verbose = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void info(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << "provhunt: " << msg << '\n';
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

PipelineConfig base_config(const Globals& g) {
  PipelineConfig c = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed != 0 || g.config.empty()) c.seed = g.seed;
  c.train.seed = c.seed;
  return c;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"provenance threat hunting"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--config", g.config, "pipeline config (JSON)");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse events into a graph snapshot");
  std::string in_path, out_path;
  bool lenient = false;
  ingest->add_option("--input", in_path, "events (.jsonl, optionally gzip)")->required();
  ingest->add_option("--output", out_path, "graph snapshot")->required();
  ingest->add_flag("--lenient", lenient, "skip bad lines and report them");
  ingest->callback([&] {
    require_file(in_path, "input");
    auto res = EventReader::read_file(in_path, lenient);
    for (const auto& issue : res.issues)
      std::cerr << in_path << ":" << issue.line << ": [" << issue.field << "] " << issue.message << '\n';
    const auto graph = build_graph(res.events);
    save_graph(out_path, graph);
    info(g, std::to_string(graph.node_count()) + " nodes, " + std::to_string(graph.edge_count()) + " edges, " +
                std::to_string(res.issues.size()) + " bad lines");
  });

  // reduce
  auto* reduce = app.add_subcommand("reduce", "apply the three reduction rules");
  std::string graph_path, report_path, net_w = "1s", cascade_w = "5s", file_w = "5s";
  double sim = 0.7;
  reduce->add_option("--graph", graph_path)->required();
  reduce->add_option("--out", out_path)->required();
  reduce->add_option("--net-window", net_w, "default 1s");
  reduce->add_option("--cascade-window", cascade_w, "default 5s");
  reduce->add_option("--file-window", file_w, "default 5s");
  reduce->add_option("--sim", sim, "name similarity threshold, default 0.7");
  reduce->add_option("--report", report_path, "per-rule counts (default <out>.report.jsonl)");
  reduce->callback([&] {
    ReduceConfig cfg{parse_duration(net_w), parse_duration(cascade_w), parse_duration(file_w), sim};
    cfg.validate();
    ReduceReport rep;
    const auto reduced = reduce_all(load_graph(graph_path), cfg, &rep);
    save_graph(out_path, reduced);
    std::string out;
    for (const auto& s : rep.steps)
      out += ordered_json{{"rule", s.rule},
                          {"nodes_before", s.nodes_before},
                          {"nodes_after", s.nodes_after},
                          {"edges_before", s.edges_before},
                          {"edges_after", s.edges_after}}
                 .dump() +
             "\n";
    write_file_bytes(report_path.empty() ? out_path + ".report.jsonl" : report_path, out);
    report_warnings(rep.warnings);
  });

  // partition
  auto* part = app.add_subcommand("partition", "split into behavior subgraphs");
  std::string theta = "20m";
  part->add_option("--graph", graph_path)->required();
  part->add_option("--theta", theta, "time threshold, default 20m");
  part->add_option("--out", out_path)->required();
  part->callback([&] {
    const auto graph = load_graph(graph_path);
    const auto subs = partition(graph, parse_duration(theta));
    write_file_bytes(out_path, subgraphs_to_jsonl(subs, graph));
    info(g, std::to_string(subs.size()) + " subgraphs");
  });

  // train
  auto* trn = app.add_subcommand("train", "contrastive training of the dual encoder");
  std::string pairs_path, seq_path, intel_path, replay_path, loss_path;
  std::optional<std::size_t> epochs, batch, dim, out_dim, n_aug;
  std::optional<double> lr, dropout, benign_rate;
  trn->add_option("--pairs", pairs_path, "training pairs");
  trn->add_option("--sequences", seq_path, "labeled sequences (instead of --pairs)");
  trn->add_option("--intel", intel_path, "intelligence entries (with --sequences)");
  trn->add_option("--replay", replay_path, "augmentation replay file");
  trn->add_option("--n-aug", n_aug);
  trn->add_option("--benign-rate", benign_rate);
  trn->add_option("--epochs", epochs);
  trn->add_option("--batch", batch);
  trn->add_option("--lr", lr);
  trn->add_option("--dropout", dropout);
  trn->add_option("--dim", dim);
  trn->add_option("--out-dim", out_dim);
  trn->add_option("--loss-log", loss_path, "per-epoch loss records");
  trn->add_option("--out", out_path)->required();
  trn->callback([&] {
    auto cfg = base_config(g);
    if (!pairs_path.empty()) cfg.training.pairs = pairs_path;
    if (!seq_path.empty()) cfg.training.sequences = seq_path;
    if (!intel_path.empty()) cfg.training.intel = intel_path;
    if (!replay_path.empty()) cfg.training.augment_replay = replay_path;
    if (cfg.training.pairs.empty() && (cfg.training.sequences.empty() || cfg.training.intel.empty()))
      throw UsageError("train needs --pairs or --sequences with --intel");
    if (n_aug) cfg.n_aug = *n_aug;
    if (benign_rate) cfg.benign_sample_rate = *benign_rate;
    if (epochs) cfg.train.epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (lr) cfg.train.learning_rate = *lr;
    if (dropout) cfg.train.dropout = *dropout;
    if (dim) cfg.encoder.dim = *dim;
    if (out_dim) cfg.encoder.out_dim = *out_dim;
    cfg.train.validate();
    Diagnostics diag;
    const auto text_pairs = to_text_pairs(assemble_pairs(cfg, &diag));
    report_warnings(diag.warnings);
    auto init = init_params(cfg.encoder, build_vocabulary(text_pairs, cfg.encoder.buckets), cfg.seed);
    std::string losses;
    auto res = train(text_pairs, cfg.train, std::move(init), [&](std::size_t e, double loss) {
      losses += ordered_json{{"epoch", e + 1}, {"loss", loss}}.dump() + "\n";
      if ((e + 1) % 10 == 0 || e == 0) info(g, "epoch " + std::to_string(e + 1) + " loss " + std::to_string(loss));
    });
    save_params(out_path, res.params);
    if (!loss_path.empty()) write_file_bytes(loss_path, losses);
  });

  // embed
  auto* emb = app.add_subcommand("embed", "embed texts with one encoder side");
  std::string params_path, side = "log";
  emb->add_option("--params", params_path)->required();
  emb->add_option("--side", side, "log|text")->check(CLI::IsMember({"log", "text"}));
  emb->add_option("--in", in_path, "{text} or {id, text} records")->required();
  emb->add_option("--out", out_path)->required();
  emb->callback([&] {
    const auto params = load_params(params_path);
    const auto rows = load_texts(in_path);
    std::vector<std::string> texts, ids;
    for (const auto& [id, text] : rows) {
      ids.push_back(id);
      texts.push_back(text);
    }
    save_embeddings(out_path, embed_corpus(texts, side_from_string(side), params, ids));
  });

  // index
  auto* idx = app.add_subcommand("index", "embed the query database");
  std::string db_path, ext_path;
  idx->add_option("--params", params_path);
  idx->add_option("--db", db_path, "query database")->required();
  idx->add_option("--embeddings", ext_path, "precomputed text embeddings aligned to --db");
  idx->add_option("--out", out_path)->required();
  idx->callback([&] {
    if (params_path.empty() && ext_path.empty()) throw UsageError("index needs --params or --embeddings");
    Diagnostics diag;
    const auto db = load_query_db_strict(db_path, &diag);
    report_warnings(diag.warnings);
    const auto index = ext_path.empty() ? build_index(db, load_params(params_path))
                                        : build_index(db, load_external_embeddings(ext_path));
    save_embeddings(out_path, index_to_table(index));
    info(g, std::to_string(index.size()) + " index rows");
  });

  // hunt
  auto* hnt = app.add_subcommand("hunt", "classify every behavior subgraph");
  std::string index_path;
  std::optional<double> min_score;
  hnt->add_option("--graph", graph_path)->required();
  hnt->add_option("--index", index_path)->required();
  hnt->add_option("--params", params_path)->required();
  hnt->add_option("--theta", theta, "time threshold, default 20m");
  hnt->add_option("--min-score", min_score, "benign below this cosine (off by default)");
  hnt->add_option("--out", out_path)->required();
  hnt->callback([&] {
    const auto graph = load_graph(graph_path);
    const auto params = load_params(params_path);
    const auto index = index_from_table(load_embeddings(index_path));
    Diagnostics diag;
    HuntOptions opts;
    opts.min_score = min_score;
    const auto results = hunt(graph, parse_duration(theta), index, params, opts, &diag);
    write_file_bytes(out_path, verdicts_to_jsonl(results));
    report_warnings(diag.warnings);
    const auto flagged = std::count_if(results.begin(), results.end(), [](const HuntResult& r) { return r.verdict.is_attack; });
    info(g, std::to_string(flagged) + " of " + std::to_string(results.size()) + " subgraphs flagged");
  });

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "join flagged subgraphs into an attack graph");
  std::string verdicts_path, format = "dot";
  rec->add_option("--graph", graph_path)->required();
  rec->add_option("--verdicts", verdicts_path)->required();
  rec->add_option("--out", out_path)->required();
  rec->add_option("--format", format, "dot|jsonl")->check(CLI::IsMember({"dot", "jsonl"}));
  rec->callback([&] {
    const auto graph = load_graph(graph_path);
    const auto ag = reconstruct(flagged_from_verdicts(load_verdicts(verdicts_path), graph), graph);
    write_file_bytes(out_path, format == "dot" ? export_dot(ag) : export_jsonl(ag));
    report_warnings(ag.warnings);
  });

  // eval
  auto* evl = app.add_subcommand("eval", "node- and graph-level metrics");
  std::string truth_path;
  bool two_hop = false;
  evl->add_option("--verdicts", verdicts_path)->required();
  evl->add_option("--truth", truth_path)->required();
  evl->add_option("--graph", graph_path, "graph the verdicts refer to")->required();
  evl->add_option("--theta", theta, "time threshold used by hunt, default 20m");
  evl->add_flag("--2hop", two_hop, "count 2-hop neighbors of truth nodes as attack");
  evl->add_option("--report", report_path)->required();
  evl->callback([&] {
    const auto graph = load_graph(graph_path);
    const auto rep = evaluate(graph, partition(graph, parse_duration(theta)), load_verdicts(verdicts_path),
                              load_truth(truth_path), two_hop);
    write_file_bytes(report_path, report_to_jsonl(rep));
    if (rep.truth_nodes_unresolved > 0)
      std::cerr << "warning: " << rep.truth_nodes_unresolved << " truth node(s) not in the graph\n";
    std::cout << "node  precision " << format_percent(rep.node.precision) << " recall "
              << format_percent(rep.node.recall) << "\n"
              << "graph precision " << format_percent(rep.graph.precision) << " recall "
              << format_percent(rep.graph.recall) << "\n";
  });

  // run
  auto* run = app.add_subcommand("run", "whole pipeline from --config");
  std::string workdir;
  run->add_option("--input", in_path, "override config input");
  run->add_option("--workdir", workdir, "override config workdir");
  run->callback([&] {
    if (g.config.empty()) throw UsageError("run needs --config");
    auto cfg = base_config(g);
    if (!in_path.empty()) cfg.input = in_path;
    if (!workdir.empty()) cfg.workdir = workdir;
    const auto art = run_pipeline(cfg, [&](const std::string& m) { info(g, m); });
    report_warnings(art.warnings);
    std::cout << "verdicts " << art.verdicts << "\nscenario " << art.scenario_dot << "\n";
    if (!art.report.empty()) std::cout << "report   " << art.report << "\n";
  });

  // synth
  auto* syn = app.add_subcommand("synth", "write the planted-scenario demo corpus");
  std::string out_dir, extra_db;
  std::size_t sessions = 2200;
  syn->add_option("--out-dir", out_dir)->required();
  syn->add_option("--sessions", sessions, "benign sessions in the test log");
  syn->add_option("--extra-db", extra_db, "extra query entries (e.g. data/querydb_demo.jsonl)");
  syn->callback([&] {
    std::vector<QueryEntry> extra;
    if (!extra_db.empty()) extra = load_query_db(extra_db).db.entries;
    const auto demo = synth::make_demo(g.seed, sessions, extra);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::string events;
    for (const auto& e : demo.test.events) events += event_to_json(e) + "\n";
    write_file_bytes((dir / "events.jsonl").string(), events);
    write_file_bytes((dir / "truth.jsonl").string(), truth_to_jsonl(demo.test.attack_nodes));
    write_file_bytes((dir / "train_sequences.jsonl").string(), labeled_sequences_to_jsonl(demo.training));
    std::ostringstream intel, db;
    save_query_db(intel, QueryDB{demo.intel});
    save_query_db(db, demo.query_db);
    write_file_bytes((dir / "intel.jsonl").string(), intel.str());
    write_file_bytes((dir / "querydb.jsonl").string(), db.str());
    write_file_bytes((dir / "augment_replay.jsonl").string(), replay_to_jsonl(demo.paraphrases));
    const auto tc = synth::desk_train_config();
    ordered_json cfg;
    cfg["input"] = "events.jsonl";
    cfg["workdir"] = "run";
    cfg["seed"] = g.seed;
    cfg["theta_max"] = "20m";
    cfg["reduce"] = {{"net_window", "1s"}, {"cascade_window", "5s"}, {"file_window", "5s"}, {"sim", 0.7}};
    cfg["encoder"] = {{"dim", 128}, {"out_dim", 128}, {"buckets", 1024}, {"shared_projection", false}};
    cfg["train"] = {{"batch_size", tc.batch_size},
                    {"epochs", tc.epochs},
                    {"learning_rate", tc.learning_rate},
                    {"dropout", tc.dropout}};
    cfg["n_aug"] = 3;
    cfg["benign_sample_rate"] = 1.0;
    cfg["training"] = {{"sequences", "train_sequences.jsonl"},
                       {"intel", "intel.jsonl"},
                       {"augment_replay", "augment_replay.jsonl"}};
    cfg["query_db"] = "querydb.jsonl";
    cfg["truth"] = "truth.jsonl";
    cfg["two_hop"] = false;
    write_file_bytes((dir / "config.json").string(), cfg.dump(2) + "\n");
    info(g, std::to_string(demo.test.events.size()) + " events, " + std::to_string(demo.training.size()) +
                " training sequences");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const PipelineError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& a : e.artifacts()) std::cerr << "  artifact: " << a << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
