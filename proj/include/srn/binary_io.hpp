#ifndef SRN_BINARY_IO_HPP_
#define SRN_BINARY_IO_HPP_

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

// Little-endian primitives for the dataset and checkpoint containers.

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("binary read: truncated u32");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_f32_block(std::ostream& os, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_f32(os, data[i]);
}

inline void read_f32_block(std::istream& is, float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = read_f32(is);
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& is, std::uint32_t max_len = 1u << 24) {
  const std::uint32_t n = read_u32(is);
  if (n > max_len) throw DataError("binary read: string length " + std::to_string(n) +
                                   " out of bounds");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("binary read: truncated string");
  return s;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char (&magic)[9], const std::string& what) {
  char buf[8];
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0)
    throw DataError(what + ": bad magic (expected " + std::string(magic, 8) + ")");
}

}  // namespace srn

#endif  // SRN_BINARY_IO_HPP_
