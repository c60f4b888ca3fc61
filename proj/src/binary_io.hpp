#pragma once

// Little-endian primitives shared by the checkpoint and tensor file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace semi3::io {

template <typename U>
void put_le(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

template <typename U>
bool get_le(std::istream& in, U& value) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return true;
}

inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline bool get_f64(std::istream& in, double& v) {
  std::uint64_t bits = 0;
  if (!get_le(in, bits)) return false;
  v = std::bit_cast<double>(bits);
  return true;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline bool get_string(std::istream& in, std::string& s, std::uint32_t limit = 1u << 24) {
  std::uint32_t size = 0;
  if (!get_le(in, size) || size > limit) return false;
  s.resize(size);
  return size == 0 || static_cast<bool>(in.read(s.data(), size));
}

}  // namespace semi3::io
