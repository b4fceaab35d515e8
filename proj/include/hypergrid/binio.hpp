#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "hypergrid/errors.hpp"

// Little-endian readers and writers shared by the binary file formats.

namespace hypergrid::binio {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failed");
}

inline void write_magic(std::ostream& os, std::string_view magic) { write_bytes(os, magic.data(), magic.size()); }

inline void write_u16(std::ostream& os, std::uint16_t v) {
  const std::array<unsigned char, 2> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  write_bytes(os, b.data(), b.size());
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b.data(), b.size());
}

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw IoError(std::string("truncated payload reading ") + what);
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<std::size_t>(is.gcount()) != magic.size() || got != magic)
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
}

inline std::uint16_t read_u16(std::istream& is, const char* what) {
  std::array<unsigned char, 2> b{};
  read_bytes(is, b.data(), b.size(), what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> b{};
  read_bytes(is, b.data(), b.size(), what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline float read_f32(std::istream& is, const char* what) { return std::bit_cast<float>(read_u32(is, what)); }

}  // namespace hypergrid::binio
