#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "aair/error.hpp"

namespace aair::io {

// Little-endian fixed-width encoding independent of host byte order.
template <class U>
void put_uint(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

template <class U>
U get_uint(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  require(static_cast<std::size_t>(in.gcount()) == sizeof(U), ErrorKind::Parse,
          "unexpected end of binary stream");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void put_f64(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_uint<std::uint64_t>(in)); }

inline void put_bytes(std::ostream& out, const std::string& s) { out.write(s.data(), static_cast<std::streamsize>(s.size())); }

// Reads in bounded chunks so a corrupt length fails on end of input rather
// than on a huge allocation.
inline std::string get_bytes(std::istream& in, std::size_t n) {
  constexpr std::size_t kChunk = 1u << 20;
  std::string s;
  while (s.size() < n) {
    const std::size_t take = std::min(kChunk, n - s.size());
    const std::size_t at = s.size();
    s.resize(at + take);
    in.read(s.data() + at, static_cast<std::streamsize>(take));
    require(static_cast<std::size_t>(in.gcount()) == take, ErrorKind::Parse, "unexpected end of binary stream");
  }
  return s;
}

inline void put_string32(std::ostream& out, const std::string& s) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s);
}

inline std::string get_string32(std::istream& in) { return get_bytes(in, get_uint<std::uint32_t>(in)); }

}  // namespace aair::io
