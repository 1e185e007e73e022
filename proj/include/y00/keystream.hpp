#pragma once

// Fibonacci LFSRs, running-key blocking, and linear complexity.
//
// Register convention: cell 0 is the output cell. A tap exponent e selects
// cell (degree - e), so the output sequence obeys
//
//     a[n] = XOR over e in taps of a[n - e]
//
// i.e. the connection polynomial is 1 + sum x^e. With taps {4,1} the
// feedback is cell0 ^ cell3, and {17,3} is the primitive trinomial
// x^17 + x^3 + 1.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "y00/bits.hpp"
#include "y00/errors.hpp"

namespace y00 {

class LfsrSpec {
 public:
  LfsrSpec(int degree, std::vector<int> taps) : degree_(degree), taps_(std::move(taps)) {
    if (degree_ < 2) throw ConfigError("LFSR degree must be at least 2, got " + std::to_string(degree_));
    std::sort(taps_.begin(), taps_.end(), std::greater<>());
    if (std::adjacent_find(taps_.begin(), taps_.end()) != taps_.end()) {
      throw ConfigError("LFSR tap exponents must be distinct");
    }
    for (int e : taps_) {
      if (e < 1 || e > degree_) {
        throw ConfigError("tap exponent " + std::to_string(e) + " outside 1.." + std::to_string(degree_));
      }
    }
    if (taps_.empty() || taps_.front() != degree_) throw ConfigError("the degree must be one of the taps");
    if (taps_.size() < 2) throw ConfigError("an LFSR needs at least two taps");
  }

  /// Parses "degree:t1,t2,..." e.g. "17:17,3".
  static LfsrSpec parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("LFSR spec '" + std::string(text) + "' is not of the form degree:taps");
    }
    auto to_int = [&](std::string_view s) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("bad integer '" + std::string(s) + "' in LFSR spec '" + std::string(text) + "'");
      }
      return v;
    };
    const int degree = to_int(text.substr(0, colon));
    std::vector<int> taps;
    std::string_view rest = text.substr(colon + 1);
    while (true) {
      const auto comma = rest.find(',');
      taps.push_back(to_int(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return LfsrSpec(degree, std::move(taps));
  }

  int degree() const noexcept { return degree_; }
  /// Descending.
  const std::vector<int>& taps() const noexcept { return taps_; }
  int tap_count() const noexcept { return static_cast<int>(taps_.size()); }

  std::string to_string() const {
    std::string s = std::to_string(degree_) + ":";
    for (std::size_t i = 0; i < taps_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(taps_[i]);
    }
    return s;
  }

  /// Bit (degree - e) set for each tap; only meaningful for degree <= 64.
  std::uint64_t feedback_mask() const noexcept {
    std::uint64_t mask = 0;
    for (int e : taps_) mask |= std::uint64_t{1} << (degree_ - e);
    return mask;
  }

  bool operator==(const LfsrSpec&) const = default;

 private:
  int degree_;
  std::vector<int> taps_;
};

class KeystreamState {
 public:
  /// The register holds the secret initial state; all-zero is rejected.
  KeystreamState(const LfsrSpec& spec, BitVector reg) : register_(std::move(reg)) {
    if (static_cast<int>(register_.size()) != spec.degree()) {
      throw ConfigError("register has " + std::to_string(register_.size()) + " cells, spec degree is " +
                        std::to_string(spec.degree()));
    }
    if (std::none_of(register_.begin(), register_.end(), [](std::uint8_t b) { return b != 0; })) {
      throw ConfigError("all-zero LFSR register generates a constant stream");
    }
  }

  const BitVector& register_bits() const noexcept { return register_; }
  std::uint64_t step_count() const noexcept { return steps_; }

 private:
  KeystreamState() = default;
  friend struct StepResult lfsr_step(const KeystreamState&, const LfsrSpec&);

  BitVector register_;
  std::uint64_t steps_ = 0;
};

struct StepResult {
  std::uint8_t output_bit;
  KeystreamState state;
};

inline StepResult lfsr_step(const KeystreamState& state, const LfsrSpec& spec) {
  const auto& reg = state.register_bits();
  const int d = spec.degree();
  if (static_cast<int>(reg.size()) != d) {
    throw ConfigError("register length " + std::to_string(reg.size()) + " does not match degree " +
                      std::to_string(d));
  }
  std::uint8_t feedback = 0;
  for (int e : spec.taps()) feedback ^= reg[static_cast<std::size_t>(d - e)];
  KeystreamState next;
  next.register_.assign(reg.begin() + 1, reg.end());
  next.register_.push_back(feedback);
  next.steps_ = state.step_count() + 1;
  return {reg[0], std::move(next)};
}

/// Register with cell i = bit i of index.
inline BitVector register_from_index(std::uint64_t index, int degree) {
  BitVector reg(static_cast<std::size_t>(degree));
  for (int i = 0; i < degree && i < 64; ++i) reg[static_cast<std::size_t>(i)] = (index >> i) & 1u;
  return reg;
}

inline std::uint64_t register_index(std::span<const std::uint8_t> reg) {
  if (reg.size() > 64) throw ArgumentError("register_index: register longer than 64 cells");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < reg.size(); ++i) v |= std::uint64_t{reg[i] & 1u} << i;
  return v;
}

inline BitVector lfsr_sequence(const LfsrSpec& spec, std::span<const std::uint8_t> seed, std::size_t n) {
  const int d = spec.degree();
  // Validates length and non-zero.
  KeystreamState state(spec, BitVector(seed.begin(), seed.end()));
  BitVector out(n);
  if (d <= 64) {
    std::uint64_t reg = register_index(seed);
    const std::uint64_t mask = spec.feedback_mask();
    const int top = d - 1;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = static_cast<std::uint8_t>(reg & 1u);
      const std::uint64_t fb = static_cast<std::uint64_t>(std::popcount(reg & mask) & 1);
      reg = (reg >> 1) | (fb << top);
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto step = lfsr_step(state, spec);
    out[i] = step.output_bit;
    state = std::move(step.state);
  }
  return out;
}

/// Output bit n as a linear functional of the initial register:
/// a[n] = parity(mask[n] & seed_index). Requires degree <= 64.
inline std::vector<std::uint64_t> output_functionals(const LfsrSpec& spec, std::size_t n) {
  const int d = spec.degree();
  if (d > 64) throw ArgumentError("output_functionals: degree above 64");
  std::vector<std::uint64_t> masks(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < static_cast<std::size_t>(d)) {
      masks[i] = std::uint64_t{1} << i;
    } else {
      std::uint64_t m = 0;
      for (int e : spec.taps()) m ^= masks[i - static_cast<std::size_t>(e)];
      masks[i] = m;
    }
  }
  return masks;
}

/// Symbols are 0..m-1; the basis index used by the modulator is symbol + 1.
struct RunningKeySequence {
  std::vector<std::uint32_t> symbols;
  std::uint32_t m = 2;
  int bits_per_symbol = 1;
  std::size_t discarded_bits = 0;

  std::size_t size() const noexcept { return symbols.size(); }
};

inline bool is_power_of_two(std::uint64_t m) noexcept { return m >= 2 && std::has_single_bit(m); }

inline int log2_exact(std::uint32_t m) {
  if (!is_power_of_two(m)) throw ConfigError("M must be a power of two (>= 2), got " + std::to_string(m));
  return std::countr_zero(m);
}

/// Blocks of log2(m) bits, most significant bit first. A trailing partial
/// block is dropped and counted.
inline RunningKeySequence running_keys(std::span<const std::uint8_t> bits, std::uint32_t m) {
  RunningKeySequence rk;
  rk.m = m;
  rk.bits_per_symbol = log2_exact(m);
  const auto w = static_cast<std::size_t>(rk.bits_per_symbol);
  const std::size_t count = bits.size() / w;
  rk.discarded_bits = bits.size() - count * w;
  rk.symbols.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::uint32_t v = 0;
    for (std::size_t b = 0; b < w; ++b) v = (v << 1) | (bits[s * w + b] & 1u);
    rk.symbols[s] = v;
  }
  return rk;
}

inline BitVector symbols_to_bits(std::span<const std::uint32_t> symbols, std::uint32_t m) {
  const int w = log2_exact(m);
  BitVector bits;
  bits.reserve(symbols.size() * static_cast<std::size_t>(w));
  for (std::uint32_t s : symbols) {
    if (s >= m) throw ArgumentError("symbol " + std::to_string(s) + " not below M=" + std::to_string(m));
    for (int b = w - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((s >> b) & 1u));
  }
  return bits;
}

/// Berlekamp-Massey over GF(2).
inline int linear_complexity(std::span<const std::uint8_t> bits) {
  if (bits.empty()) throw ArgumentError("linear_complexity of an empty sequence");
  const std::size_t n = bits.size();
  BitVector c(n + 1, 0), b(n + 1, 0), t;
  c[0] = b[0] = 1;
  std::size_t len = 0;
  std::ptrdiff_t m = -1;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t discrepancy = bits[i] & 1u;
    for (std::size_t j = 1; j <= len; ++j) discrepancy ^= c[j] & bits[i - j];
    if (!discrepancy) continue;
    t = c;
    const auto shift = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) - m);
    for (std::size_t j = 0; j + shift <= n; ++j) c[j + shift] ^= b[j];
    if (2 * len <= i) {
      len = i + 1 - len;
      m = static_cast<std::ptrdiff_t>(i);
      b = std::move(t);
    }
  }
  return static_cast<int>(len);
}

/// Output bit i = truth_table[x], x having bit r = i-th output of register r.
inline BitVector combiner_sequence(std::span<const LfsrSpec> specs, std::span<const BitVector> seeds,
                                   std::span<const std::uint8_t> truth_table, std::size_t n) {
  if (specs.size() != seeds.size()) throw ConfigError("combiner: one seed per register required");
  if (specs.empty() || specs.size() > 16) throw ConfigError("combiner: arity must be 1..16");
  if (truth_table.size() != (std::size_t{1} << specs.size())) {
    throw ConfigError("combiner: truth table has " + std::to_string(truth_table.size()) + " rows, arity " +
                      std::to_string(specs.size()) + " needs " + std::to_string(std::size_t{1} << specs.size()));
  }
  std::vector<BitVector> streams;
  streams.reserve(specs.size());
  for (std::size_t r = 0; r < specs.size(); ++r) streams.push_back(lfsr_sequence(specs[r], seeds[r], n));
  BitVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = 0;
    for (std::size_t r = 0; r < streams.size(); ++r) x |= std::size_t{streams[r][i]} << r;
    out[i] = truth_table[x] & 1u;
  }
  return out;
}

}  // namespace y00
