#pragma once

// Little-endian primitives for the columnar bundle files.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rgbsde/errors.hpp"

namespace rgbsde::io {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int k = 0; k < 8; ++k) r |= ((v >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return r;
  }
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_f64s(std::ostream& out, std::span<const double> values) {
  for (double v : values) write_f64(out, v);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated bundle file");
  return to_little(v);
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline std::vector<double> read_f64s(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (auto& v : values) v = read_f64(in);
  return values;
}

inline void write_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  std::array<char, 8> buf{};
  in.read(buf.data(), 8);
  if (!in || std::memcmp(buf.data(), magic, 8) != 0) {
    throw FormatError(std::string("expected a '") + magic + "' bundle");
  }
}

}  // namespace rgbsde::io
