#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "provhunt/common.hpp"
#include "provhunt/embedding_file.hpp"
#include "provhunt/tokenize.hpp"

namespace provhunt {

enum class Side { log, text };

inline std::string_view to_string(Side s) { return s == Side::log ? "log" : "text"; }

inline Side side_from_string(std::string_view s) {
  if (s == "log") return Side::log;
  if (s == "text") return Side::text;
  throw ValidationError("side must be 'log' or 'text', got '" + std::string(s) + "'");
}

/// Dense row-major float64 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return std::span<double>(data).subspan(r * cols, cols); }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Two-layer residual projection: h = relu(W1 x + b1), g = h + relu(W2 h + b2).
struct Projection {
  Matrix w1;               // out x in
  std::vector<double> b1;  // out
  Matrix w2;               // out x out
  std::vector<double> b2;  // out

  friend bool operator==(const Projection&, const Projection&) = default;
};

struct EncoderConfig {
  std::size_t dim = 128;
  std::size_t out_dim = 128;
  std::uint32_t buckets = 1024;
  bool shared_projection = false;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline const double kInitialTau = 0.07;
// Temperature floor (logit scale <= 100).
inline const double kMinLogTau = std::log(0.01);

/// Dual encoder: one token-embedding table per modality, one projection
/// per modality (or one shared), and a learnable temperature stored as
/// log(tau) so tau stays positive.
struct EncoderParams {
  EncoderConfig config;
  Vocabulary vocab;
  Matrix emb_log;
  Matrix emb_text;
  Projection proj_log;
  Projection proj_text;
  double log_tau = std::log(kInitialTau);

  double tau() const { return std::exp(log_tau); }
  const Matrix& embeddings(Side s) const { return s == Side::log ? emb_log : emb_text; }
  const Projection& projection(Side s) const {
    return (s == Side::log || config.shared_projection) ? proj_log : proj_text;
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// mt19937_64 with distribution code of our own so the stream of values is
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t bits() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

inline EncoderParams init_params(const EncoderConfig& cfg, Vocabulary vocab, std::uint64_t seed) {
  if (cfg.dim == 0 || cfg.out_dim == 0) throw ValidationError("encoder dims must be positive");
  Rng rng(seed);
  EncoderParams p;
  p.config = cfg;
  p.vocab = std::move(vocab);
  const std::size_t v = p.vocab.size();
  auto fill = [&](Matrix& m, std::size_t r, std::size_t c, double scale) {
    m = Matrix(r, c);
    for (auto& x : m.data) x = rng.normal() * scale;
  };
  fill(p.emb_log, v, cfg.dim, 1.0);
  fill(p.emb_text, v, cfg.dim, 1.0);
  auto init_proj = [&](Projection& pr) {
    fill(pr.w1, cfg.out_dim, cfg.dim, std::sqrt(2.0 / double(cfg.dim)));
    pr.b1.assign(cfg.out_dim, 0.0);
    fill(pr.w2, cfg.out_dim, cfg.out_dim, std::sqrt(1.0 / double(cfg.out_dim)));
    pr.b2.assign(cfg.out_dim, 0.0);
  };
  init_proj(p.proj_log);
  init_proj(p.proj_text);
  p.log_tau = std::log(kInitialTau);
  return p;
}

/// Mean of the token-embedding rows; zero vector for no tokens.
inline std::vector<double> encode(std::span<const std::uint32_t> ids, Side side, const EncoderParams& p) {
  const Matrix& emb = p.embeddings(side);
  std::vector<double> x(emb.cols, 0.0);
  if (ids.empty()) return x;
  for (auto id : ids) {
    if (id >= emb.rows) throw ValidationError("token id out of range");
    const auto r = emb.row(id);
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += r[c];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : x) v *= inv;
  return x;
}

inline std::vector<double> encode(const std::vector<std::string>& tokens, Side side, const EncoderParams& p) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(p.vocab.lookup(t));
  return encode(ids, side, p);
}

inline std::vector<double> project(std::span<const double> x, const Projection& pr) {
  if (x.size() != pr.w1.cols)
    throw ValidationError("projection input has dim " + std::to_string(x.size()) + ", expected " +
                          std::to_string(pr.w1.cols));
  const std::size_t out = pr.w1.rows;
  std::vector<double> h(out);
  for (std::size_t i = 0; i < out; ++i) {
    double a = pr.b1[i];
    const auto w = pr.w1.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) a += w[j] * x[j];
    h[i] = a > 0.0 ? a : 0.0;
  }
  std::vector<double> g(h);
  for (std::size_t i = 0; i < out; ++i) {
    double a = pr.b2[i];
    const auto w = pr.w2.row(i);
    for (std::size_t j = 0; j < out; ++j) a += w[j] * h[j];
    if (a > 0.0) g[i] += a;
  }
  return g;
}

inline std::vector<double> project(std::span<const double> x, Side side, const EncoderParams& p) {
  return project(x, p.projection(side));
}

struct Embedding {
  std::vector<double> vec;
  bool normalized = false;
};

/// Unit-normalizes `v`. A zero vector stays zero and is reported as not
/// normalized.
inline Embedding normalize(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) return Embedding{std::move(v), false};
  for (auto& x : v) x /= n;
  return Embedding{std::move(v), true};
}

inline Embedding embed_text(std::string_view text, Side side, const EncoderParams& p) {
  const auto ids = p.vocab.ids(text);
  return normalize(project(encode(ids, side, p), side, p));
}

/// tokenize -> encode -> project -> normalize for every text, in order.
/// Row ids default to the row number.
inline EmbeddingTable embed_corpus(std::span<const std::string> texts, Side side, const EncoderParams& p,
                                   std::span<const std::string> ids = {}) {
  if (!ids.empty() && ids.size() != texts.size()) throw ValidationError("ids and texts differ in length");
  EmbeddingTable t;
  t.dim = static_cast<std::uint32_t>(p.config.out_dim);
  t.normalized = true;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto e = embed_text(texts[i], side, p);
    t.append(e.vec, ids.empty() ? std::to_string(i) : ids[i]);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Bidirectional InfoNCE.
//
// With logits S_ij = v_i . u_j / tau the loss is the mean of the log-to-text
// and text-to-log cross entropies, each summed over the N positives on the
// diagonal.

struct InfoNceResult {
  double loss = 0.0;
  Matrix d_v;          // dLoss/dV, N x D
  Matrix d_u;          // dLoss/dU, N x D
  double d_log_tau = 0.0;
};

namespace detail {

// Sums after sorting, so the result does not depend on input order.
inline double ordered_sum(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

inline double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  std::vector<double> e(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) e[i] = std::exp(xs[i] - m);
  return m + std::log(ordered_sum(std::move(e)));
}

inline InfoNceResult info_nce_with_grad(const Matrix& v, const Matrix& u, double log_tau) {
  const std::size_t n = v.rows;
  const std::size_t d = v.cols;
  const double tau = std::exp(log_tau);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += v(i, k) * u(j, k);
      s(i, j) = dot / tau;
    }

  InfoNceResult r;
  Matrix g(n, n);  // dLoss/dS
  std::vector<double> l2t(n), t2l(n);
  std::vector<double> buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = s.row(i);
    const double lse = log_sum_exp(row);
    l2t[i] = lse - s(i, i);
    for (std::size_t j = 0; j < n; ++j) g(i, j) += 0.5 * std::exp(row[j] - lse);
    g(i, i) -= 0.5;
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = s(i, j);
    const double lse = log_sum_exp(buf);
    t2l[j] = lse - s(j, j);
    for (std::size_t i = 0; i < n; ++i) g(i, j) += 0.5 * std::exp(buf[i] - lse);
    g(j, j) -= 0.5;
  }
  r.loss = 0.5 * (ordered_sum(std::move(l2t)) + ordered_sum(std::move(t2l)));

  r.d_v = Matrix(n, d);
  r.d_u = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double gij = g(i, j) / tau;
      r.d_log_tau -= g(i, j) * s(i, j);
      for (std::size_t k = 0; k < d; ++k) {
        r.d_v(i, k) += gij * u(j, k);
        r.d_u(j, k) += gij * v(i, k);
      }
    }
  return r;
}

inline void require_unit_rows(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double n = 0.0;
    for (double x : m.row(i)) n += x * x;
    if (std::abs(std::sqrt(n) - 1.0) > 1e-6)
      throw ValidationError(std::string(what) + " row " + std::to_string(i) + " is not unit-norm");
  }
}

}  // namespace detail

/// Bidirectional InfoNCE over N aligned pairs (row i of `v` pairs with row
/// i of `u`). Rows must be unit-norm to 1e-6.
inline double info_nce_loss(const Matrix& v, const Matrix& u, double tau) {
  if (v.rows == 0 || v.rows != u.rows || v.cols != u.cols)
    throw ValidationError("info_nce_loss: V and U must be non-empty and equally shaped");
  if (!(tau > 0.0)) throw ValidationError("info_nce_loss: tau must be positive");
  detail::require_unit_rows(v, "V");
  detail::require_unit_rows(u, "U");
  return detail::info_nce_with_grad(v, u, std::log(tau)).loss;
}

// ---------------------------------------------------------------------------
// Backpropagation through encode -> project -> normalize.

struct ParamGradients {
  Matrix emb_log;
  Matrix emb_text;
  Projection proj_log;
  Projection proj_text;
  double log_tau = 0.0;

  static ParamGradients zeros_like(const EncoderParams& p) {
    ParamGradients g;
    g.emb_log = Matrix(p.emb_log.rows, p.emb_log.cols);
    g.emb_text = Matrix(p.emb_text.rows, p.emb_text.cols);
    auto z = [](const Projection& src) {
      return Projection{Matrix(src.w1.rows, src.w1.cols), std::vector<double>(src.b1.size()),
                        Matrix(src.w2.rows, src.w2.cols), std::vector<double>(src.b2.size())};
    };
    g.proj_log = z(p.proj_log);
    g.proj_text = z(p.proj_text);
    return g;
  }

  Matrix& embeddings(Side s) { return s == Side::log ? emb_log : emb_text; }
  Projection& projection(Side s, bool shared) { return (s == Side::log || shared) ? proj_log : proj_text; }
};

/// Inverted dropout on the projection hidden layer. `rate` is the drop
/// probability.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

namespace detail {

struct ForwardCache {
  std::span<const std::uint32_t> ids;
  std::vector<double> x, a1, mask, h, a2, g, v;
  double norm = 0.0;
};

inline void forward(std::span<const std::uint32_t> ids, Side side, const EncoderParams& p,
                    const Dropout& dropout, ForwardCache& c) {
  const Projection& pr = p.projection(side);
  c.ids = ids;
  c.x = encode(ids, side, p);
  const std::size_t out = pr.w1.rows;
  c.a1.assign(out, 0.0);
  c.mask.assign(out, 1.0);
  c.h.assign(out, 0.0);
  for (std::size_t i = 0; i < out; ++i) {
    double a = pr.b1[i];
    const auto w = pr.w1.row(i);
    for (std::size_t j = 0; j < c.x.size(); ++j) a += w[j] * c.x[j];
    c.a1[i] = a;
    if (dropout.rate > 0.0 && dropout.rng != nullptr)
      c.mask[i] = dropout.rng->uniform() < dropout.rate ? 0.0 : 1.0 / (1.0 - dropout.rate);
    c.h[i] = (a > 0.0 ? a : 0.0) * c.mask[i];
  }
  c.a2.assign(out, 0.0);
  c.g = c.h;
  for (std::size_t i = 0; i < out; ++i) {
    double a = pr.b2[i];
    const auto w = pr.w2.row(i);
    for (std::size_t j = 0; j < out; ++j) a += w[j] * c.h[j];
    c.a2[i] = a;
    if (a > 0.0) c.g[i] += a;
  }
  double n = 0.0;
  for (double x : c.g) n += x * x;
  c.norm = std::sqrt(n);
  const double inv = c.norm > 0.0 ? 1.0 / c.norm : 0.0;
  c.v.resize(out);
  for (std::size_t i = 0; i < out; ++i) c.v[i] = c.g[i] * inv;
}

inline void backward(const ForwardCache& c, std::span<const double> dv, Side side, const EncoderParams& p,
                     ParamGradients& grads) {
  if (c.norm == 0.0) return;
  const Projection& pr = p.projection(side);
  Projection& gp = grads.projection(side, p.config.shared_projection);
  const std::size_t out = pr.w1.rows;
  const std::size_t in = pr.w1.cols;

  double vdv = 0.0;
  for (std::size_t i = 0; i < out; ++i) vdv += c.v[i] * dv[i];
  std::vector<double> dg(out);
  for (std::size_t i = 0; i < out; ++i) dg[i] = (dv[i] - c.v[i] * vdv) / c.norm;

  std::vector<double> dh(dg);
  for (std::size_t i = 0; i < out; ++i) {
    if (c.a2[i] <= 0.0) continue;
    const double da2 = dg[i];
    gp.b2[i] += da2;
    auto gw = gp.w2.row(i);
    const auto w = pr.w2.row(i);
    for (std::size_t j = 0; j < out; ++j) {
      gw[j] += da2 * c.h[j];
      dh[j] += da2 * w[j];
    }
  }
  std::vector<double> dx(in, 0.0);
  for (std::size_t i = 0; i < out; ++i) {
    if (c.a1[i] <= 0.0 || c.mask[i] == 0.0) continue;
    const double da1 = dh[i] * c.mask[i];
    gp.b1[i] += da1;
    auto gw = gp.w1.row(i);
    const auto w = pr.w1.row(i);
    for (std::size_t j = 0; j < in; ++j) {
      gw[j] += da1 * c.x[j];
      dx[j] += da1 * w[j];
    }
  }
  if (c.ids.empty()) return;
  Matrix& ge = grads.embeddings(side);
  const double inv = 1.0 / static_cast<double>(c.ids.size());
  for (auto id : c.ids) {
    auto r = ge.row(id);
    for (std::size_t j = 0; j < in; ++j) r[j] += dx[j] * inv;
  }
}

}  // namespace detail

/// Loss of one batch of aligned (log, text) token-id lists through the full
/// model, accumulating gradients into `grads` when given. A zero-norm
/// projection output contributes a zero row.
inline double batch_loss(const EncoderParams& p, std::span<const std::vector<std::uint32_t>> log_ids,
                         std::span<const std::vector<std::uint32_t>> text_ids, ParamGradients* grads,
                         const Dropout& dropout = {}) {
  const std::size_t n = log_ids.size();
  if (n == 0 || n != text_ids.size()) throw ValidationError("batch_loss: mismatched batch");
  std::vector<detail::ForwardCache> lc(n), tc(n);
  const std::size_t d = p.config.out_dim;
  Matrix v(n, d), u(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    detail::forward(log_ids[i], Side::log, p, dropout, lc[i]);
    detail::forward(text_ids[i], Side::text, p, dropout, tc[i]);
    std::copy(lc[i].v.begin(), lc[i].v.end(), v.row(i).begin());
    std::copy(tc[i].v.begin(), tc[i].v.end(), u.row(i).begin());
  }
  auto r = detail::info_nce_with_grad(v, u, p.log_tau);
  if (grads != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      detail::backward(lc[i], r.d_v.row(i), Side::log, p, *grads);
      detail::backward(tc[i], r.d_u.row(i), Side::text, p, *grads);
    }
    grads->log_tau += r.d_log_tau;
  }
  return r.loss;
}

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double learning_rate = 1e-5;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 2) throw ValidationError("batch_size must be >= 2 (in-batch negatives)");
    if (epochs == 0) throw ValidationError("epochs must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0,1)");
  }
};

struct TextPair {
  std::string log_text;
  std::string intel_text;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  EncoderParams params;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

namespace detail {

inline double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return s;
}

inline double gradient_norm(const ParamGradients& g) {
  double s = squared_norm(g.emb_log) + squared_norm(g.emb_text) + g.log_tau * g.log_tau;
  for (const Projection* pr : {&g.proj_log, &g.proj_text}) {
    s += squared_norm(pr->w1) + squared_norm(pr->w2);
    for (double x : pr->b1) s += x * x;
    for (double x : pr->b2) s += x * x;
  }
  return std::sqrt(s);
}

inline void axpy(Matrix& dst, const Matrix& src, double a) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += a * src.data[i];
}

inline void axpy(std::vector<double>& dst, const std::vector<double>& src, double a) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

inline void sgd_step(EncoderParams& p, const ParamGradients& g, double lr) {
  axpy(p.emb_log, g.emb_log, -lr);
  axpy(p.emb_text, g.emb_text, -lr);
  auto step = [&](Projection& pr, const Projection& gp) {
    axpy(pr.w1, gp.w1, -lr);
    axpy(pr.b1, gp.b1, -lr);
    axpy(pr.w2, gp.w2, -lr);
    axpy(pr.b2, gp.b2, -lr);
  };
  step(p.proj_log, g.proj_log);
  if (!p.config.shared_projection) step(p.proj_text, g.proj_text);
  p.log_tau = std::max(kMinLogTau, p.log_tau - lr * g.log_tau);
}

}  // namespace detail

/// Builds the shared vocabulary over both sides of the training pairs.
inline Vocabulary build_vocabulary(std::span<const TextPair> pairs, std::uint32_t buckets) {
  std::vector<std::string> texts;
  texts.reserve(pairs.size() * 2);
  for (const auto& pr : pairs) {
    texts.push_back(pr.log_text);
    texts.push_back(pr.intel_text);
  }
  return Vocabulary::build(texts, buckets);
}

/// Plain minibatch SGD on the bidirectional InfoNCE loss with in-batch
/// negatives. Batches come from a per-epoch shuffle; a trailing batch with
/// fewer than two pairs is skipped. Deterministic given `cfg.seed`.
inline TrainResult train(std::span<const TextPair> pairs, const TrainConfig& cfg, EncoderParams init,
                         const std::function<void(std::size_t, double)>& on_epoch = {}) {
  cfg.validate();
  if (pairs.size() < cfg.batch_size)
    throw ValidationError("need at least batch_size (" + std::to_string(cfg.batch_size) + ") pairs, got " +
                          std::to_string(pairs.size()));
  TrainResult result;
  result.params = std::move(init);
  EncoderParams& p = result.params;

  std::vector<std::vector<std::uint32_t>> log_ids, text_ids;
  for (const auto& pr : pairs) {
    log_ids.push_back(p.vocab.ids(pr.log_text));
    text_ids.push_back(p.vocab.ids(pr.intel_text));
  }

  Rng rng(cfg.seed);
  Dropout dropout{cfg.dropout, &rng};
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = ParamGradients::zeros_like(p);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<std::uint32_t>> bl, bt;
      for (std::size_t k = start; k < end; ++k) {
        bl.push_back(log_ids[order[k]]);
        bt.push_back(text_ids[order[k]]);
      }
      grads = ParamGradients::zeros_like(p);
      const double loss = batch_loss(p, bl, bt, &grads, dropout);
      const double gnorm = detail::gradient_norm(grads);
      if (!std::isfinite(loss) || !std::isfinite(gnorm)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " batch " << batches << " (pairs " << start << ".."
            << end << "): loss=" << loss << " tau=" << p.tau() << " grad_norm=" << gnorm;
        throw TrainingDiverged(msg.str());
      }
      detail::sgd_step(p, grads, cfg.learning_rate);
      total += loss;
      ++batches;
    }
    const double mean = batches > 0 ? total / static_cast<double>(batches) : 0.0;
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint: "PPAR1" | u32 version | u64 dim | u64 out_dim | u32 buckets |
// u8 shared | u64 n_tokens | str* tokens | matrices (u64 rows, u64 cols,
// f64*) in the order emb_log, emb_text, proj_log{w1,b1,w2,b2},
// proj_text{...} | f64 log_tau.

inline constexpr std::string_view kParamsMagic = "PPAR1";

namespace detail {

inline void write_matrix(std::ostream& out, const Matrix& m) {
  bin::write_le<std::uint64_t>(out, m.rows);
  bin::write_le<std::uint64_t>(out, m.cols);
  for (double x : m.data) bin::write_le<double>(out, x);
}

inline Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  const auto r = bin::read_le<std::uint64_t>(in, "matrix rows");
  const auto c = bin::read_le<std::uint64_t>(in, "matrix cols");
  if (r != rows || c != cols) throw FormatError("checkpoint matrix shape mismatch");
  Matrix m(rows, cols);
  for (auto& x : m.data) x = bin::read_le<double>(in, "matrix data");
  return m;
}

inline void write_vector(std::ostream& out, const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  m.data = v;
  write_matrix(out, m);
}

inline std::vector<double> read_vector(std::istream& in, std::size_t n) { return read_matrix(in, n, 1).data; }

}  // namespace detail

inline void write_params(std::ostream& out, const EncoderParams& p) {
  out.write(kParamsMagic.data(), kParamsMagic.size());
  bin::write_le<std::uint32_t>(out, 1);
  bin::write_le<std::uint64_t>(out, p.config.dim);
  bin::write_le<std::uint64_t>(out, p.config.out_dim);
  bin::write_le<std::uint32_t>(out, p.config.buckets);
  bin::write_le<std::uint8_t>(out, p.config.shared_projection ? 1 : 0);
  bin::write_le<std::uint64_t>(out, p.vocab.tokens().size());
  for (const auto& t : p.vocab.tokens()) bin::write_string(out, t);
  detail::write_matrix(out, p.emb_log);
  detail::write_matrix(out, p.emb_text);
  for (const Projection* pr : {&p.proj_log, &p.proj_text}) {
    detail::write_matrix(out, pr->w1);
    detail::write_vector(out, pr->b1);
    detail::write_matrix(out, pr->w2);
    detail::write_vector(out, pr->b2);
  }
  bin::write_le<double>(out, p.log_tau);
}

inline EncoderParams read_params(std::istream& in) {
  bin::expect_magic(in, kParamsMagic);
  if (bin::read_le<std::uint32_t>(in, "version") != 1) throw FormatError("unsupported checkpoint version");
  EncoderParams p;
  p.config.dim = bin::read_le<std::uint64_t>(in, "dim");
  p.config.out_dim = bin::read_le<std::uint64_t>(in, "out_dim");
  p.config.buckets = bin::read_le<std::uint32_t>(in, "buckets");
  p.config.shared_projection = bin::read_le<std::uint8_t>(in, "shared") != 0;
  const auto n_tokens = bin::read_le<std::uint64_t>(in, "token count");
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(bin::read_string(in, "token"));
  p.vocab = Vocabulary(std::move(tokens), p.config.buckets);
  const std::size_t v = p.vocab.size();
  const std::size_t d = p.config.dim;
  const std::size_t o = p.config.out_dim;
  p.emb_log = detail::read_matrix(in, v, d);
  p.emb_text = detail::read_matrix(in, v, d);
  for (Projection* pr : {&p.proj_log, &p.proj_text}) {
    pr->w1 = detail::read_matrix(in, o, d);
    pr->b1 = detail::read_vector(in, o);
    pr->w2 = detail::read_matrix(in, o, o);
    pr->b2 = detail::read_vector(in, o);
  }
  p.log_tau = bin::read_le<double>(in, "log_tau");
  return p;
}

inline void save_params(const std::string& path, const EncoderParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_params(out, p);
}

inline EncoderParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open params: " + path);
  return read_params(in);
}

}  // namespace provhunt
