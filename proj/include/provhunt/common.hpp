#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace provhunt {

/// Malformed input record. Carries the 1-based line number (0 if unknown)
/// and the offending field name.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Well-formed record whose values violate a domain constraint.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file does not match its declared layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Nanos = std::int64_t;

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;
inline constexpr Nanos kNanosPerMinute = 60 * kNanosPerSecond;

/// Parses "500ms", "1s", "20m", "2h" or a bare integer (nanoseconds).
inline Nanos parse_duration(std::string_view text) {
  if (text.empty()) throw ValidationError("empty duration");
  std::size_t pos = 0;
  while (pos < text.size() && (text[pos] >= '0' && text[pos] <= '9')) ++pos;
  if (pos == 0) throw ValidationError("duration must start with digits: " + std::string(text));
  const Nanos value = std::stoll(std::string(text.substr(0, pos)));
  const std::string_view unit = text.substr(pos);
  if (unit.empty() || unit == "ns") return value;
  if (unit == "us") return value * 1000;
  if (unit == "ms") return value * 1'000'000;
  if (unit == "s") return value * kNanosPerSecond;
  if (unit == "m") return value * kNanosPerMinute;
  if (unit == "h") return value * 60 * kNanosPerMinute;
  throw ValidationError("unknown duration unit: " + std::string(text));
}

/// 64-bit FNV-1a. Stable across platforms; used for token buckets and
/// stage fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Little-endian binary helpers shared by the snapshot formats.
namespace bin {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw FormatError(std::string("truncated file while reading ") + what);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what) {
  const auto len = read_le<std::uint32_t>(in, what);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len))
    throw FormatError(std::string("truncated file while reading ") + what);
  return s;
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic)
    throw FormatError("bad magic, expected " + std::string(magic));
}

}  // namespace bin
}  // namespace provhunt
