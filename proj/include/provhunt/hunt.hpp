#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "provhunt/embed.hpp"
#include "provhunt/embedding_file.hpp"
#include "provhunt/intel.hpp"
#include "provhunt/partition.hpp"

namespace provhunt {

/// Exact cosine index over the embedded query database. Rows are unit
/// vectors, so a dot product is the cosine.
struct QueryIndex {
  std::size_t dim = 0;
  std::vector<double> vectors;  // K x dim
  std::vector<std::string> labels;
  std::vector<std::string> texts;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t k) const { return std::span<const double>(vectors).subspan(k * dim, dim); }

  friend bool operator==(const QueryIndex&, const QueryIndex&) = default;
};

namespace detail {

inline void check_index_db(const QueryDB& db) {
  if (db.empty()) throw ValidationError("cannot build an index from an empty query database");
  if (!db.has_benign()) throw ValidationError("query database has no benign entry; classification is undefined");
}

inline void add_row(QueryIndex& idx, std::vector<double> v, const QueryEntry& q) {
  auto e = normalize(std::move(v));
  if (!e.normalized) throw ValidationError("query '" + q.text + "' embeds to the zero vector");
  idx.vectors.insert(idx.vectors.end(), e.vec.begin(), e.vec.end());
  idx.labels.push_back(q.label);
  idx.texts.push_back(q.text);
}

}  // namespace detail

/// Embeds every query text with the text-side encoder.
inline QueryIndex build_index(const QueryDB& db, const EncoderParams& params) {
  detail::check_index_db(db);
  QueryIndex idx;
  idx.dim = params.config.out_dim;
  for (const auto& q : db.entries) {
    const auto ids = params.vocab.ids(q.text);
    detail::add_row(idx, project(encode(ids, Side::text, params), Side::text, params), q);
  }
  return idx;
}

/// Uses precomputed text embeddings, one row per database entry in order.
inline QueryIndex build_index(const QueryDB& db, const EmbeddingTable& table) {
  detail::check_index_db(db);
  if (table.count() != db.size())
    throw ValidationError("embedding table has " + std::to_string(table.count()) + " rows for " +
                          std::to_string(db.size()) + " queries");
  QueryIndex idx;
  idx.dim = table.dim;
  for (std::size_t k = 0; k < db.size(); ++k) {
    const auto r = table.row(k);
    detail::add_row(idx, std::vector<double>(r.begin(), r.end()), db.entries[k]);
  }
  return idx;
}

// Index files are PEMB1 tables whose item id is "label<TAB>text".
inline EmbeddingTable index_to_table(const QueryIndex& idx) {
  EmbeddingTable t;
  t.dim = static_cast<std::uint32_t>(idx.dim);
  t.normalized = true;
  for (std::size_t k = 0; k < idx.size(); ++k) t.append(idx.row(k), idx.labels[k] + "\t" + idx.texts[k]);
  return t;
}

inline QueryIndex index_from_table(const EmbeddingTable& t) {
  QueryDB db;
  for (const auto& id : t.ids) {
    const auto tab = id.find('\t');
    if (tab == std::string::npos) throw FormatError("index row id lacks a label: " + id);
    db.entries.push_back({id.substr(tab + 1), id.substr(0, tab), "index"});
  }
  return build_index(db, t);
}

struct Verdict {
  std::size_t subgraph_id = 0;
  std::string label;
  double score = 0.0;
  std::string matched_text;
  std::size_t matched_row = 0;
  bool is_attack = false;
};

struct HuntOptions {
  /// Below this best cosine the verdict falls back to benign.
  std::optional<double> min_score;
};

/// Best index row for a unit query vector; ties go to the lowest row.
inline std::pair<std::size_t, double> nearest(const QueryIndex& index, std::span<const double> q) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto r = index.row(k);
    double s = 0.0;
    for (std::size_t c = 0; c < index.dim; ++c) s += r[c] * q[c];
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return {best, best_score};
}

inline Verdict classify_sequence(const LogSequence& seq, const QueryIndex& index, const EncoderParams& params,
                                 const HuntOptions& opts = {}, Diagnostics* diag = nullptr) {
  if (index.size() == 0) throw ValidationError("empty query index");
  if (index.dim != params.config.out_dim)
    throw ValidationError("index dim " + std::to_string(index.dim) + " does not match encoder output dim " +
                          std::to_string(params.config.out_dim));
  Verdict v;
  v.subgraph_id = seq.subgraph_id;
  auto emb = embed_text(seq.text, Side::log, params);
  if (seq.text.empty() || !emb.normalized) {
    if (diag) diag->warn("subgraph " + std::to_string(seq.subgraph_id) + ": empty sequence, classified benign");
    v.label = std::string(kBenignLabel);
    return v;
  }
  auto [row, score] = nearest(index, emb.vec);
  v.matched_row = row;
  v.score = score;
  v.matched_text = index.texts[row];
  v.label = index.labels[row];
  if (opts.min_score && score < *opts.min_score) v.label = std::string(kBenignLabel);
  v.is_attack = v.label != kBenignLabel;
  return v;
}

struct HuntResult {
  BehaviorSubgraph subgraph;
  LogSequence sequence;
  Verdict verdict;
};

/// Partition, serialize, and classify every behavior subgraph. Results are
/// in t_start order.
inline std::vector<HuntResult> hunt(const ProvenanceGraph& g, Nanos theta_max, const QueryIndex& index,
                                    const EncoderParams& params, const HuntOptions& opts = {},
                                    Diagnostics* diag = nullptr) {
  std::vector<HuntResult> out;
  for (auto& sub : partition(g, theta_max)) {
    auto seq = to_sequence(sub, g);
    auto verdict = classify_sequence(seq, index, params, opts, diag);
    out.push_back(HuntResult{std::move(sub), std::move(seq), std::move(verdict)});
  }
  return out;
}

}  // namespace provhunt
