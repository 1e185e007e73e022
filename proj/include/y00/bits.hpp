#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "y00/errors.hpp"

namespace y00 {

/// One bit per element, each 0 or 1.
using BitVector = std::vector<std::uint8_t>;

/// Hex form, MSB-first: bit 0 of the vector is the high bit of the first
/// digit. A trailing partial nibble is padded with zero bits.
inline std::string to_hex(std::span<const std::uint8_t> bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve((bits.size() + 3) / 4);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    unsigned nibble = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      nibble <<= 1;
      if (i + b < bits.size()) nibble |= bits[i + b] & 1u;
    }
    out.push_back(kDigits[nibble]);
  }
  return out;
}

/// Inverse of to_hex. With bit_length unset the result has 4 bits per digit;
/// otherwise the padding is dropped and must be zero.
inline BitVector from_hex(std::string_view hex, std::size_t bit_length = SIZE_MAX) {
  BitVector bits;
  bits.reserve(hex.size() * 4);
  for (char c : hex) {
    unsigned v;
    if (c >= '0' && c <= '9') {
      v = static_cast<unsigned>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v = static_cast<unsigned>(c - 'a' + 10);
    } else if (c >= 'A' && c <= 'F') {
      v = static_cast<unsigned>(c - 'A' + 10);
    } else {
      throw ArgumentError(std::string("invalid hex digit '") + c + "'");
    }
    for (int b = 3; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((v >> b) & 1u));
  }
  if (bit_length != SIZE_MAX) {
    if (bit_length > bits.size() || bits.size() - bit_length >= 4) {
      throw ArgumentError("hex string of " + std::to_string(hex.size()) +
                          " digits cannot hold exactly " + std::to_string(bit_length) + " bits");
    }
    for (std::size_t i = bit_length; i < bits.size(); ++i) {
      if (bits[i] != 0) throw ArgumentError("non-zero padding bits in hex string");
    }
    bits.resize(bit_length);
  }
  return bits;
}

inline BitVector complement(std::span<const std::uint8_t> bits) {
  BitVector out(bits.begin(), bits.end());
  for (auto& b : out) b ^= 1u;
  return out;
}

inline std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ArgumentError("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] ^ b[i]) & 1u;
  return d;
}

}  // namespace y00
