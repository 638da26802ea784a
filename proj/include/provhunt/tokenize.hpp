#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provhunt/common.hpp"

namespace provhunt {

/// Lowercases and splits on anything that is not an ASCII letter or digit.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole. Paths
/// and "ip:port" strings therefore fall apart into their components.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Token -> row map. Known tokens occupy [0, |known|); anything else hashes
/// into [|known|, |known| + buckets).
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, std::uint32_t buckets) : tokens_(std::move(tokens)), buckets_(buckets) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
  }

  /// Every token occurring at least `min_count` times across `texts`.
  template <typename Range>
  static Vocabulary build(const Range& texts, std::uint32_t buckets, std::size_t min_count = 1) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts)
      for (auto& tok : tokenize(t)) ++counts[std::move(tok)];
    std::vector<std::string> kept;
    for (const auto& [tok, n] : counts)
      if (n >= min_count) kept.push_back(tok);
    return Vocabulary(std::move(kept), buckets);
  }

  std::uint32_t known() const noexcept { return static_cast<std::uint32_t>(tokens_.size()); }
  std::uint32_t buckets() const noexcept { return buckets_; }
  std::uint32_t size() const noexcept { return known() + buckets_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::uint32_t lookup(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    if (buckets_ == 0) throw ValidationError("out-of-vocabulary token with no hash buckets");
    return known() + static_cast<std::uint32_t>(fnv1a(token) % buckets_);
  }

  std::vector<std::uint32_t> ids(std::string_view text) const {
    std::vector<std::uint32_t> out;
    for (const auto& tok : tokenize(text)) out.push_back(lookup(tok));
    return out;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.buckets_ == b.buckets_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint32_t buckets_ = 0;
};

}  // namespace provhunt
