#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "provhunt/embed.hpp"
#include "support/classes.hpp"
#include "support/gradcheck.hpp"

using namespace provhunt;

namespace {

Matrix rows(std::vector<std::vector<double>> r) {
  Matrix m(r.size(), r.front().size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) m(i, j) = r[i][j];
  return m;
}

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (auto& x : m.row(i)) {
      x = rng.normal();
      s += x * x;
    }
    for (auto& x : m.row(i)) x /= std::sqrt(s);
  }
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("provhunt_embed_" + name)).string();
}

EncoderParams small_params(std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.out_dim = 6;
  cfg.buckets = 16;
  return init_params(cfg, Vocabulary::build(std::vector<std::string>{"bash read /etc/passwd", "wget payload"}, 16),
                     seed);
}

}  // namespace

TEST(Tokenize, SplitsAndLowercases) {
  EXPECT_EQ(tokenize("Bash READ /etc/passwd"), (std::vector<std::string>{"bash", "read", "etc", "passwd"}));
  EXPECT_EQ(tokenize("10.0.0.1:443"), (std::vector<std::string>{"10", "0", "0", "1", "443"}));
  EXPECT_TRUE(tokenize(" ;; ").empty());
  EXPECT_EQ(tokenize("caf\xC3\xA9 ok"), (std::vector<std::string>{"caf\xC3\xA9", "ok"}));
}

TEST(Vocabulary, KnownThenBuckets) {
  const auto v = Vocabulary::build(std::vector<std::string>{"b a", "a c"}, 4);
  EXPECT_EQ(v.known(), 3u);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(v.lookup("a"), 0u);
  EXPECT_EQ(v.lookup("c"), 2u);
  const auto oov = v.lookup("zebra");
  EXPECT_GE(oov, 3u);
  EXPECT_LT(oov, 7u);
  EXPECT_EQ(v.lookup("zebra"), oov);
  EXPECT_THROW(Vocabulary({"a"}, 0).lookup("b"), ValidationError);
}

TEST(Encode, MeanOfRows) {
  auto p = small_params(1);
  const std::vector<std::uint32_t> ids{0, 2, 2};
  const auto x = encode(ids, Side::log, p);
  for (std::size_t k = 0; k < p.config.dim; ++k)
    EXPECT_NEAR(x[k], (p.emb_log(0, k) + 2 * p.emb_log(2, k)) / 3.0, 1e-15);
  const auto empty = encode(std::vector<std::uint32_t>{}, Side::text, p);
  for (double v : empty) EXPECT_EQ(v, 0.0);
}

TEST(Project, ZerosPropagate) {
  Projection pr{Matrix(3, 4), std::vector<double>(3), Matrix(3, 3), std::vector<double>(3)};
  for (double v : project(std::vector<double>{1, 2, 3, 4}, pr)) EXPECT_EQ(v, 0.0);
}

TEST(Project, ResidualPassThrough) {
  Projection pr{rows({{1, 0}, {0, 1}}), {0, 0}, Matrix(2, 2), {-100, -100}};
  EXPECT_EQ(project(std::vector<double>{0.5, 2.0}, pr), (std::vector<double>{0.5, 2.0}));
}

TEST(Project, MatchesStraightLineOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + rng.below(5), out = 1 + rng.below(5);
    Projection pr{Matrix(out, in), std::vector<double>(out), Matrix(out, out), std::vector<double>(out)};
    for (auto& x : pr.w1.data) x = rng.normal();
    for (auto& x : pr.w2.data) x = rng.normal();
    for (auto& x : pr.b1) x = rng.normal();
    for (auto& x : pr.b2) x = rng.normal();
    std::vector<double> x(in);
    for (auto& v : x) v = rng.normal();
    std::vector<double> h1(out), want(out);
    for (std::size_t i = 0; i < out; ++i) {
      double a = pr.b1[i];
      for (std::size_t j = 0; j < in; ++j) a += pr.w1(i, j) * x[j];
      h1[i] = std::max(0.0, a);
    }
    for (std::size_t i = 0; i < out; ++i) {
      double a = pr.b2[i];
      for (std::size_t j = 0; j < out; ++j) a += pr.w2(i, j) * h1[j];
      want[i] = h1[i] + std::max(0.0, a);
    }
    const auto got = project(x, pr);
    for (std::size_t i = 0; i < out; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
  Projection pr{Matrix(2, 3), {0, 0}, Matrix(2, 2), {0, 0}};
  EXPECT_THROW(project(std::vector<double>{1, 2}, pr), ValidationError);
}

TEST(Normalize, UnitAndZero) {
  const auto e = normalize({3, 4});
  EXPECT_TRUE(e.normalized);
  EXPECT_DOUBLE_EQ(e.vec[0], 0.6);
  const auto z = normalize({0, 0});
  EXPECT_FALSE(z.normalized);
}

TEST(InfoNce, ClosedForms) {
  const auto one = rows({{1, 0}});
  EXPECT_NEAR(info_nce_loss(one, one, 1.0), 0.0, 1e-15);
  const auto eye = rows({{1, 0}, {0, 1}});
  const double e = std::exp(1.0);
  EXPECT_NEAR(info_nce_loss(eye, eye, 1.0), -2.0 * std::log(e / (e + 1.0)), 1e-12);
  EXPECT_NEAR(info_nce_loss(eye, eye, 1.0), 0.6265, 1e-4);
  EXPECT_NEAR(info_nce_loss(eye, eye, 0.07), 2.0 * std::log1p(std::exp(-1.0 / 0.07)), 1e-12);
  EXPECT_NEAR(info_nce_loss(eye, eye, 0.07), 1.25e-6, 1e-8);
}

TEST(InfoNce, Rejections) {
  const auto bad = rows({{2, 0}});
  const auto ok = rows({{1, 0}});
  EXPECT_THROW(info_nce_loss(bad, ok, 1.0), ValidationError);
  EXPECT_THROW(info_nce_loss(ok, ok, 0.0), ValidationError);
  EXPECT_THROW(info_nce_loss(ok, rows({{1, 0}, {0, 1}}), 1.0), ValidationError);
}

TEST(InfoNce, PermutationAndSwapInvariance) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(6), d = 1 + rng.below(5);
    const auto v = random_unit_rows(rng, n, d);
    const auto u = random_unit_rows(rng, n, d);
    const double tau = 0.05 + rng.uniform();
    const double base = info_nce_loss(v, u, tau);
    EXPECT_EQ(info_nce_loss(u, v, tau), base);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix pv(n, d), pu(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(v.row(perm[i]).begin(), v.row(perm[i]).end(), pv.row(i).begin());
      std::copy(u.row(perm[i]).begin(), u.row(perm[i]).end(), pu.row(i).begin());
    }
    EXPECT_EQ(info_nce_loss(pv, pu, tau), base);
  }
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = gradcheck::random_instance(rng, 4, 3, 3);
    EXPECT_LT(gradcheck::relative_error(inst), 1e-4);
  }
}

TEST(InfoNce, SharedProjectionGradient) {
  Rng rng(78);
  auto inst = gradcheck::random_instance(rng, 4, 3, 3);
  inst.params.config.shared_projection = true;
  EXPECT_LT(gradcheck::relative_error(inst), 1e-4);
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-5);
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  const std::vector<TextPair> few(3, TextPair{"a", "b"});
  EXPECT_THROW(train(few, TrainConfig{}, small_params(1)), ValidationError);
}

TEST(Train, DeterministicAndDecreasing) {
  const auto data = fixture::class_pairs(4, 3);
  std::vector<TextPair> pairs;
  for (const auto& cp : data) {
    pairs.push_back({cp.log, cp.intel});
  }
  EncoderConfig ec;
  ec.dim = 32;
  ec.out_dim = 32;
  ec.buckets = 64;
  const auto init = init_params(ec, build_vocabulary(pairs, ec.buckets), 2);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 16;
  tc.learning_rate = 1e-3;
  tc.seed = 9;
  std::size_t calls = 0;
  const auto a = train(pairs, tc, init, [&](std::size_t, double) { ++calls; });
  const auto b = train(pairs, tc, init);
  EXPECT_EQ(calls, 15u);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
  EXPECT_GE(a.params.tau(), 0.01 - 1e-12);
}

TEST(Train, DivergenceReported) {
  std::vector<TextPair> pairs(4, TextPair{"a b", "c d"});
  auto p = init_params(EncoderConfig{4, 3, 4, false}, build_vocabulary(pairs, 4), 1);
  p.log_tau = std::nan("");
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 1;
  try {
    train(pairs, tc, p);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("tau="), std::string::npos);
  }
}

TEST(EmbedCorpus, UnitRowsAndPurity) {
  const auto p = small_params(4);
  const std::vector<std::string> texts{"bash read /etc/passwd", "wget payload", "bash read /etc/passwd"};
  const auto t = embed_corpus(texts, Side::log, p);
  ASSERT_EQ(t.count(), 3u);
  EXPECT_EQ(t.ids[1], "1");
  for (std::size_t r = 0; r < t.count(); ++r) {
    double s = 0;
    for (float x : t.row(r)) s += double(x) * x;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  EXPECT_TRUE(std::equal(t.row(0).begin(), t.row(0).end(), t.row(2).begin()));
}

TEST(EmbeddingFile, RoundTripBitExact) {
  const auto p = small_params(4);
  const std::vector<std::string> texts{"bash", "wget payload"};
  const std::vector<std::string> ids{"x\ty", "\xC3\xA9"};
  const auto t = embed_corpus(texts, Side::text, p, ids);
  std::stringstream ss;
  write_embeddings(ss, t);
  const auto bytes = ss.str();
  EXPECT_EQ(bytes.size(), 5 + 4 + 8 + 1 + 2 * 6 * 4 + (4 + 3) + (4 + 2));
  std::istringstream in(bytes);
  EXPECT_EQ(read_embeddings(in), t);
  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_embeddings(cut), FormatError);
}

TEST(EmbeddingFile, ExternalRawRowsNormalized) {
  EmbeddingTable t;
  t.dim = 768;
  t.normalized = false;
  Rng rng(6);
  for (int r = 0; r < 3; ++r) {
    std::vector<double> v(768);
    for (auto& x : v) x = 5 * rng.normal();
    t.append(v, "row" + std::to_string(r));
  }
  const auto path = temp_path("raw.pemb");
  save_embeddings(path, t);
  const auto loaded = load_external_embeddings(path, 768);
  ASSERT_EQ(loaded.count(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (float x : loaded.row(r)) s += double(x) * x;
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
  EXPECT_THROW(load_external_embeddings(path, 128), FormatError);
  {
    std::ofstream(path, std::ios::binary) << "PEMB2";
  }
  EXPECT_THROW(load_external_embeddings(path), FormatError);
  std::filesystem::remove(path);
}

TEST(Params, RoundTrip) {
  auto p = small_params(8);
  p.log_tau = -1.25;
  std::stringstream ss;
  write_params(ss, p);
  const auto bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 5), "PPAR1");
  std::istringstream in(bytes);
  EXPECT_EQ(read_params(in), p);
  std::istringstream cut(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_params(cut), FormatError);
}
