#include <gtest/gtest.h>

#include <sstream>

#include "provhunt/intel.hpp"

using namespace provhunt;

namespace {

std::vector<LabeledSequence> sequences(std::size_t attacks, std::size_t benign) {
  std::vector<LabeledSequence> out;
  for (std::size_t i = 0; i < attacks; ++i) out.push_back({"sh read /etc/shadow " + std::to_string(i), "T1068"});
  for (std::size_t i = 0; i < benign; ++i) out.push_back({"cron read /etc/crontab " + std::to_string(i), "benign"});
  return out;
}

const std::vector<QueryEntry> kIntel{
    {"The adversary exploited a kernel bug to gain root.", "T1068", "x"},
    {"Local privilege escalation through a vulnerable driver.", "T1068", "x"},
    {"Command interpreter used to run scripts.", "T1059", "x"},
    {std::string(kBenignSentence), "benign", ""},
};

}  // namespace

TEST(Labels, Validity) {
  EXPECT_TRUE(is_valid_label("T1059"));
  EXPECT_TRUE(is_valid_label("benign"));
  EXPECT_FALSE(is_valid_label("T105"));
  EXPECT_FALSE(is_valid_label("T1059.001"));
  EXPECT_FALSE(is_valid_label("t1059"));
}

TEST(QueryDb, LoadReportsAndDeduplicates) {
  std::istringstream in(
      R"({"text":"a b","label":"T1059","source":"s"})"
      "\n\n"
      R"({"text":"a b","label":"T1105","source":"s"})"
      "\n"
      R"({"text":"c","label":"X1"})"
      "\n"
      R"({"label":"T1059"})"
      "\n"
      R"({"text":"d","label":"benign"})"
      "\n"
      "not json\n");
  const auto r = load_query_db(in);
  ASSERT_EQ(r.db.size(), 2u);
  EXPECT_EQ(r.db.entries[0].label, "T1059");
  EXPECT_EQ(r.db.entries[1].source, "");
  EXPECT_TRUE(r.db.has_benign());
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_EQ(r.issues[0].line, 4u);
  EXPECT_EQ(r.issues[1].field, "text");
  EXPECT_EQ(r.issues[2].line, 7u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(QueryDb, EmptyWarns) {
  std::istringstream in("");
  const auto r = load_query_db(in);
  EXPECT_TRUE(r.db.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(QueryDb, RoundTrip) {
  QueryDB db{kIntel};
  db.entries.push_back({"quote \" and tab\t and caf\xC3\xA9", "T1105", "aug"});
  std::stringstream ss;
  save_query_db(ss, db);
  const auto r = load_query_db(ss);
  EXPECT_TRUE(r.issues.empty());
  EXPECT_EQ(r.db, db);
}

TEST(BuildPairs, AttackTimesIntelPlusBenignSample) {
  const auto seqs = sequences(3, 10);
  const auto pairs = build_pairs(seqs, kIntel, 0.5, 7);
  std::size_t attack = 0, benign = 0;
  for (const auto& p : pairs) {
    if (p.label == "benign") {
      ++benign;
      EXPECT_EQ(p.intel_text, kBenignSentence);
    } else {
      ++attack;
      EXPECT_EQ(p.label, "T1068");
    }
  }
  EXPECT_EQ(attack, 6u);
  EXPECT_EQ(benign, 5u);
  EXPECT_EQ(build_pairs(seqs, kIntel, 0.5, 7), pairs);
  EXPECT_EQ(build_pairs(seqs, kIntel, 1.0, 7).size(), 16u);
}

TEST(BuildPairs, Errors) {
  std::vector<LabeledSequence> seqs{{"x", "T1003"}};
  EXPECT_THROW(build_pairs(seqs, kIntel, 1.0, 1), ValidationError);
  EXPECT_THROW(build_pairs(sequences(1, 1), kIntel, 0.0, 1), ValidationError);
  EXPECT_THROW(build_pairs(sequences(1, 1), kIntel, 1.5, 1), ValidationError);
  Diagnostics d;
  EXPECT_EQ(build_pairs(sequences(0, 4), kIntel, 1.0, 1, &d).size(), 4u);
  EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(Augment, AddsParaphrasesWithLabel) {
  const std::vector<QueryEntry> base{kIntel[0], kIntel[2]};
  auto aug = [](const std::string& text, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(text + " v" + std::to_string(i));
    return out;
  };
  const auto out = augment_intelligence(base, 3, aug);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_EQ(out[2].label, "T1068");
  EXPECT_EQ(out[2].source, "aug");
  EXPECT_EQ(out[7].label, "T1059");
  EXPECT_EQ(augment_intelligence(base, 0, aug).size(), 2u);
}

TEST(Augment, FailuresAndDuplicatesTolerated) {
  const std::vector<QueryEntry> base{kIntel[0], kIntel[2]};
  Diagnostics d;
  const auto same = augment_intelligence(base, 3, identity_augmenter, &d);
  EXPECT_EQ(same.size(), 2u);
  EXPECT_FALSE(d.warnings.empty());

  auto failing = [](const std::string& text, std::size_t) -> std::vector<std::string> {
    if (text.rfind("Command", 0) == 0) throw std::runtime_error("offline");
    return {"p1", "p2", "p3"};
  };
  Diagnostics d2;
  EXPECT_EQ(augment_intelligence(base, 3, failing, &d2).size(), 5u);
  EXPECT_EQ(d2.warnings.size(), 1u);
}

TEST(ReplayAugmenter, LoadAndServe) {
  std::istringstream in(
      R"({"original_text":"a","paraphrases":["a1","a2","a3","a4"]})"
      "\n");
  const auto r = ReplayAugmenter::load(in);
  EXPECT_EQ(r.size(), 1u);
  EXPECT_EQ(r("a", 3), (std::vector<std::string>{"a1", "a2", "a3"}));
  EXPECT_THROW(r("b", 3), std::runtime_error);
  std::istringstream bad(R"({"original_text":"a"})");
  EXPECT_THROW(ReplayAugmenter::load(bad), ParseError);
}
