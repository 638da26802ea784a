// Generates the planted-scenario corpus, trains the dual encoder, hunts
// the test log and prints the flagged subgraphs and the scenario graph.
//
//   hunt_quickstart [seed] [benign_sessions]

#include <cstdlib>
#include <iostream>

#include "provhunt/provhunt.hpp"

using namespace provhunt;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const std::size_t sessions = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 600;

  const auto demo = synth::make_demo(seed, sessions);
  Diagnostics diag;
  std::map<std::string, std::vector<std::string>> replay(demo.paraphrases.begin(), demo.paraphrases.end());
  const auto intel = augment_intelligence(
      demo.intel, 3, [&](const std::string& t, std::size_t) { return replay.at(t); }, &diag);
  const auto pairs = to_text_pairs(build_pairs(demo.training, intel, 1.0, seed, &diag));

  EncoderConfig ecfg;
  auto params = init_params(ecfg, build_vocabulary(pairs, ecfg.buckets), seed);
  const auto trained = train(pairs, synth::desk_train_config(seed), std::move(params), [](std::size_t e, double l) {
    if ((e + 1) % 20 == 0) std::cerr << "epoch " << e + 1 << " loss " << l << '\n';
  });

  const auto g = reduce_all(build_graph(demo.test.events), {});
  const auto index = build_index(demo.query_db, trained.params);
  std::vector<FlaggedSubgraph> flagged;
  for (const auto& r : hunt(g, kDefaultThetaMax, index, trained.params)) {
    if (!r.verdict.is_attack) continue;
    std::cout << r.verdict.label << "  " << r.verdict.score << "  " << r.sequence.text << '\n';
    flagged.push_back({r.subgraph, r.verdict.label});
  }
  std::cout << export_dot(reconstruct(flagged, g));
}
