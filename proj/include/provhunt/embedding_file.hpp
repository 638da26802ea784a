#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "provhunt/common.hpp"

namespace provhunt {

/// Row-major table of float32 vectors with one item id per row.
struct EmbeddingTable {
  std::uint32_t dim = 0;
  bool normalized = true;
  std::vector<float> values;
  std::vector<std::string> ids;

  std::size_t count() const noexcept { return ids.size(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }

  void append(std::span<const double> vec, std::string id) {
    if (vec.size() != dim) throw ValidationError("embedding row has wrong dimension");
    for (double v : vec) values.push_back(static_cast<float>(v));
    ids.push_back(std::move(id));
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// PEMB1 layout (little-endian):
//   "PEMB1" | u32 dim | u64 count | u8 normalized
//   count * dim float32 values, row-major
//   count * (u32 byte length | UTF-8 item id)
inline constexpr std::string_view kEmbeddingMagic = "PEMB1";

inline void write_embeddings(std::ostream& out, const EmbeddingTable& t) {
  if (t.values.size() != t.count() * t.dim) throw ValidationError("embedding table shape mismatch");
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  bin::write_le<std::uint32_t>(out, t.dim);
  bin::write_le<std::uint64_t>(out, t.count());
  bin::write_le<std::uint8_t>(out, t.normalized ? 1 : 0);
  for (float v : t.values) bin::write_le<float>(out, v);
  for (const auto& id : t.ids) bin::write_string(out, id);
}

inline EmbeddingTable read_embeddings(std::istream& in) {
  bin::expect_magic(in, kEmbeddingMagic);
  EmbeddingTable t;
  t.dim = bin::read_le<std::uint32_t>(in, "dim");
  if (t.dim == 0) throw FormatError("embedding dim is zero");
  const auto count = bin::read_le<std::uint64_t>(in, "count");
  const auto flag = bin::read_le<std::uint8_t>(in, "normalized flag");
  if (flag > 1) throw FormatError("bad normalized flag");
  t.normalized = flag == 1;
  t.values.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count * t.dim, 1u << 26)));
  for (std::uint64_t i = 0; i < count * t.dim; ++i) t.values.push_back(bin::read_le<float>(in, "embedding values"));
  t.ids.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 22)));
  for (std::uint64_t i = 0; i < count; ++i) t.ids.push_back(bin::read_string(in, "item ids"));
  return t;
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_embeddings(out, t);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embeddings: " + path);
  return read_embeddings(in);
}

/// Loads a table produced by any backend. Raw rows are normalized on load.
/// `expected_dim` of 0 accepts any width.
inline EmbeddingTable load_external_embeddings(const std::string& path, std::uint32_t expected_dim = 0) {
  auto t = load_embeddings(path);
  if (expected_dim != 0 && t.dim != expected_dim)
    throw FormatError("embedding dim " + std::to_string(t.dim) + " does not match expected " +
                      std::to_string(expected_dim));
  if (!t.normalized) {
    for (std::size_t r = 0; r < t.count(); ++r) {
      double norm = 0.0;
      for (std::size_t c = 0; c < t.dim; ++c) norm += double(t.values[r * t.dim + c]) * t.values[r * t.dim + c];
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (std::size_t c = 0; c < t.dim; ++c)
        t.values[r * t.dim + c] = static_cast<float>(t.values[r * t.dim + c] / norm);
    }
    t.normalized = true;
  }
  return t;
}

}  // namespace provhunt
