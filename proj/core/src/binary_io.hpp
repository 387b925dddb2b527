#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sego/errors.hpp"

namespace sego::detail {

// Little-endian fixed-width encoding shared by checkpoints and the view cache.

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_i64(std::ostream& out, std::int64_t v) { write_u64(out, static_cast<std::uint64_t>(v)); }

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  write_u64(out, bits);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("unexpected end of binary stream");
  return to_little_endian(v);
}

inline std::int64_t read_i64(std::istream& in) { return static_cast<std::int64_t>(read_u64(in)); }

inline double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1 << 20) {
  const auto len = read_u64(in);
  if (len > max_len) throw ParseError("string length " + std::to_string(len) + " exceeds limit");
  std::string s(len, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw ParseError("unexpected end of binary stream");
  return s;
}

}  // namespace sego::detail
