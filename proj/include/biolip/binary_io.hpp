#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "biolip/error.hpp"

// Little-endian primitives, independent of host byte order.

namespace biolip::binary {

inline void put_u64(std::ostream& out, std::uint64_t v, int bytes = 8) {
  char b[8];
  for (int i = 0; i < bytes; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, bytes);
}

inline std::uint64_t get_u64(std::istream& in, int bytes = 8) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw Error(Errc::io_failure, "truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_u64(out, v, 4); }
inline std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_u64(in, 4)); }

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw Error(Errc::io_failure, "implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error(Errc::io_failure, "truncated stream");
  return s;
}

}  // namespace biolip::binary
