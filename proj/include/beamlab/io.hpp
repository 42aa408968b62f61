#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian field readers/writers for the binary container formats.
// Byte order is pinned by the file specs, so everything goes through
// explicit per-byte encoding rather than raw struct dumps.

namespace beamlab::io {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename UInt>
void write_uint(std::ostream& out, UInt value) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<unsigned char>(value >> (8 * i));
  }
  write_bytes(out, buf, sizeof(UInt));
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_uint(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_uint(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_uint(out, v); }

inline void write_f32(std::ostream& out, float v) {
  write_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64(std::ostream& out, double v) {
  write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void read_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error("unexpected end of file");
  }
}

template <typename UInt>
UInt read_uint(std::istream& in) {
  unsigned char buf[sizeof(UInt)];
  read_bytes(in, buf, sizeof(UInt));
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(buf[i]) << (8 * i);
  }
  return value;
}

inline std::uint8_t read_u8(std::istream& in) { return read_uint<std::uint8_t>(in); }
inline std::uint32_t read_u32(std::istream& in) { return read_uint<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return read_uint<std::uint64_t>(in); }

inline float read_f32(std::istream& in) {
  return std::bit_cast<float>(read_u32(in));
}

inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_u64(in));
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
  write_bytes(out, magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5],
                         const std::string& what) {
  char buf[4];
  read_bytes(in, buf, 4);
  if (std::memcmp(buf, magic, 4) != 0) {
    throw std::runtime_error(what + ": bad magic");
  }
}

}  // namespace beamlab::io
