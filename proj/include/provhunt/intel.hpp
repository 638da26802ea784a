#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "provhunt/common.hpp"
#include "provhunt/embed.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/reduce.hpp"

namespace provhunt {

inline constexpr std::string_view kBenignLabel = "benign";
inline constexpr std::string_view kBenignSentence = "This is a benign sequence.";

/// `T` followed by four digits, or "benign".
inline bool is_valid_label(std::string_view label) {
  if (label == kBenignLabel) return true;
  if (label.size() != 5 || label[0] != 'T') return false;
  for (std::size_t i = 1; i < 5; ++i)
    if (label[i] < '0' || label[i] > '9') return false;
  return true;
}

struct QueryEntry {
  std::string text;
  std::string label;
  std::string source;

  bool is_benign() const { return label == kBenignLabel; }
  friend bool operator==(const QueryEntry&, const QueryEntry&) = default;
};

struct QueryDB {
  std::vector<QueryEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  bool has_benign() const {
    return std::any_of(entries.begin(), entries.end(), [](const QueryEntry& e) { return e.is_benign(); });
  }
  friend bool operator==(const QueryDB&, const QueryDB&) = default;
};

struct QueryDBLoad {
  QueryDB db;
  std::vector<IngestIssue> issues;  // rejected lines
  std::vector<std::string> warnings;
};

inline QueryEntry parse_query_entry(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, "<record>", "line " + std::to_string(line_no) + ": " + e.what());
  }
  QueryEntry q;
  for (auto [field, dst] : {std::pair{"text", &q.text}, std::pair{"label", &q.label}, std::pair{"source", &q.source}}) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
      if (std::string_view(field) == "source" && it == j.end()) continue;
      throw ParseError(line_no, field, "line " + std::to_string(line_no) + ": missing or non-string '" + field + "'");
    }
    *dst = it->get<std::string>();
  }
  if (q.text.empty()) throw ParseError(line_no, "text", "line " + std::to_string(line_no) + ": empty text");
  if (!is_valid_label(q.label))
    throw ValidationError("line " + std::to_string(line_no) + ": bad label '" + q.label + "'");
  return q;
}

/// Reads {text, label, source} records. Bad lines are reported and
/// skipped; repeated texts keep their first occurrence.
inline QueryDBLoad load_query_db(std::istream& in) {
  QueryDBLoad out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto q = parse_query_entry(line, line_no);
      if (!seen.insert(q.text).second) {
        out.warnings.push_back("line " + std::to_string(line_no) + ": duplicate text dropped");
        continue;
      }
      out.db.entries.push_back(std::move(q));
    } catch (const ParseError& e) {
      out.issues.push_back({line_no, e.field(), e.what()});
    } catch (const ValidationError& e) {
      out.issues.push_back({line_no, "label", e.what()});
    }
  }
  if (out.db.empty()) out.warnings.push_back("query database is empty");
  return out;
}

inline QueryDBLoad load_query_db(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open query db: " + path);
  return load_query_db(in);
}

inline void save_query_db(std::ostream& out, const QueryDB& db) {
  for (const auto& q : db.entries) {
    nlohmann::ordered_json j;
    j["text"] = q.text;
    j["label"] = q.label;
    j["source"] = q.source;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

struct LabeledSequence {
  std::string text;
  std::string label;  // TTP id or "benign"
};

struct TrainingPair {
  std::string sequence_text;
  std::string intel_text;
  std::string label;
  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

inline std::vector<TextPair> to_text_pairs(std::span<const TrainingPair> pairs) {
  std::vector<TextPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.sequence_text, p.intel_text});
  return out;
}

/// Pairs every attack sequence with each intelligence text of its label and
/// a sample of round(rate * |benign|) benign sequences (without
/// replacement, deterministic in `seed`) with the benign sentence.
inline std::vector<TrainingPair> build_pairs(std::span<const LabeledSequence> sequences,
                                             std::span<const QueryEntry> intel, double benign_sample_rate,
                                             std::uint64_t seed, Diagnostics* diag = nullptr) {
  if (!(benign_sample_rate > 0.0 && benign_sample_rate <= 1.0))
    throw ValidationError("benign_sample_rate must be in (0, 1]");
  std::map<std::string, std::vector<const QueryEntry*>> by_label;
  for (const auto& q : intel)
    if (!q.is_benign()) by_label[q.label].push_back(&q);

  std::vector<TrainingPair> out;
  std::vector<std::size_t> benign;
  std::set<std::string> missing;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = sequences[i];
    if (s.label == kBenignLabel) {
      benign.push_back(i);
      continue;
    }
    auto it = by_label.find(s.label);
    if (it == by_label.end()) {
      missing.insert(s.label);
      continue;
    }
    for (const auto* q : it->second) out.push_back({s.text, q->text, s.label});
  }
  if (!missing.empty()) {
    std::string labels;
    for (const auto& l : missing) labels += (labels.empty() ? "" : ", ") + l;
    throw ValidationError("attack sequences without intelligence for label(s): " + labels);
  }
  if (out.empty() && diag) diag->warn("no attack sequences; pairs are benign-only");

  const auto take = static_cast<std::size_t>(std::llround(benign_sample_rate * static_cast<double>(benign.size())));
  Rng rng(seed);
  rng.shuffle(benign);
  benign.resize(take);
  std::sort(benign.begin(), benign.end());
  for (auto i : benign) out.push_back({sequences[i].text, std::string(kBenignSentence), std::string(kBenignLabel)});
  return out;
}

// ---------------------------------------------------------------------------

/// Produces paraphrases of `text`; asked for `n` of them.
using Augmenter = std::function<std::vector<std::string>(const std::string& text, std::size_t n)>;

/// Adds up to `n_aug` paraphrases per entry (same label, source "aug").
/// Augmenter failures leave the entry unaugmented; paraphrases repeating an
/// existing text are dropped.
inline std::vector<QueryEntry> augment_intelligence(std::span<const QueryEntry> entries, std::size_t n_aug,
                                                    const Augmenter& augmenter, Diagnostics* diag = nullptr) {
  std::vector<QueryEntry> out(entries.begin(), entries.end());
  if (n_aug == 0) return out;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) seen.insert(e.text);
  std::size_t dropped = 0;
  for (const auto& e : entries) {
    std::vector<std::string> paras;
    try {
      paras = augmenter(e.text, n_aug);
    } catch (const std::exception& ex) {
      if (diag) diag->warn("augmenter failed for '" + e.text + "': " + ex.what());
      continue;
    }
    if (paras.size() > n_aug) paras.resize(n_aug);
    if (paras.size() < n_aug && diag)
      diag->warn("augmenter returned " + std::to_string(paras.size()) + " of " + std::to_string(n_aug) +
                 " paraphrases for '" + e.text + "'");
    for (auto& p : paras) {
      if (!seen.insert(p).second) {
        ++dropped;
        continue;
      }
      out.push_back(QueryEntry{std::move(p), e.label, "aug"});
    }
  }
  if (dropped > 0 && diag) diag->warn(std::to_string(dropped) + " duplicate paraphrase(s) dropped");
  return out;
}

/// Returns the input unchanged; mostly useful as a stub.
inline std::vector<std::string> identity_augmenter(const std::string& text, std::size_t) { return {text}; }

/// Replays paraphrases recorded by an external generator. File records are
/// {"original_text": ..., "paraphrases": [...]}.
class ReplayAugmenter {
 public:
  static ReplayAugmenter load(std::istream& in) {
    ReplayAugmenter r;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, "<record>", "replay line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.contains("original_text") || !j["original_text"].is_string())
        throw ParseError(line_no, "original_text", "replay line " + std::to_string(line_no) + ": missing original_text");
      if (!j.contains("paraphrases") || !j["paraphrases"].is_array())
        throw ParseError(line_no, "paraphrases", "replay line " + std::to_string(line_no) + ": missing paraphrases");
      auto& dst = r.table_[j["original_text"].get<std::string>()];
      for (const auto& p : j["paraphrases"]) dst.push_back(p.get<std::string>());
    }
    return r;
  }

  static ReplayAugmenter load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay file: " + path);
    return load(in);
  }

  std::vector<std::string> operator()(const std::string& text, std::size_t n) const {
    auto it = table_.find(text);
    if (it == table_.end()) throw std::runtime_error("no recorded paraphrases");
    std::vector<std::string> out(it->second.begin(), it->second.begin() + std::min(n, it->second.size()));
    return out;
  }

  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

}  // namespace provhunt
