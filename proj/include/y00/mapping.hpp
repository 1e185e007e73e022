#pragma once

// M-ary phase constellation and the keyed shift-permutation patterns.
//
// Basis phases are theta_i = (2i - 1) pi / (2M), i = 1..M, spaced pi/M, and
// each basis carries the antipodal pair {theta_i, theta_i + pi}. Pattern j
// shifts the key column cyclically by j - 1 and adds (j - 1) delta to every
// angle, delta = pi / M^2. All 2M^2 signal phases then form a uniform grid
//
//     phase(n) = pi/(2M) + n * delta,   n = 0 .. 2M^2 - 1
//
// with n = bit * M^2 + (i - 1) M + (j - 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "y00/errors.hpp"
#include "y00/keystream.hpp"

namespace y00 {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces to [0, 2pi).
inline double wrap_phase(double phase) noexcept {
  double r = std::fmod(phase, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// Circular distance, in [0, pi].
inline double phase_distance(double a, double b) noexcept {
  const double d = wrap_phase(a - b);
  return std::min(d, kTwoPi - d);
}

struct FineLabel {
  std::uint32_t j;  // pattern 1..M
  std::uint32_t k;  // running key 1..M
  std::uint8_t bit;
};

class Constellation {
 public:
  explicit Constellation(std::uint32_t m) : m_(m) {
    if (!is_power_of_two(m) || m > 65536) {
      throw ConfigError("M must be a power of two in 2..65536, got " + std::to_string(m));
    }
  }

  std::uint32_t m() const noexcept { return m_; }
  int bits_per_symbol() const noexcept { return std::countr_zero(m_); }
  double spacing() const noexcept { return kPi / m_; }
  double delta() const noexcept { return spacing() / m_; }

  /// theta_i for i = 1..M.
  double base_phase(std::uint32_t i) const {
    if (i < 1 || i > m_) throw ArgumentError("basis index " + std::to_string(i) + " outside 1..M");
    return (2.0 * i - 1.0) * kPi / (2.0 * m_);
  }

  std::vector<double> base_phases() const {
    std::vector<double> out(m_);
    for (std::uint32_t i = 1; i <= m_; ++i) out[i - 1] = base_phase(i);
    return out;
  }

  // Coarse grid: the 2M points theta_i (+ pi), index r = bit * M + (i - 1).
  std::uint32_t coarse_count() const noexcept { return 2 * m_; }
  double coarse_phase(std::uint32_t r) const noexcept {
    return static_cast<double>((2 * (r % coarse_count()) + 1) % (4 * m_)) * kPi / (2.0 * m_);
  }

  // Fine grid of all 2M^2 pattern-shifted signal phases.
  std::uint64_t fine_count() const noexcept { return 2ull * m_ * m_; }

  double fine_phase(std::uint64_t n) const noexcept {
    const std::uint64_t mm = std::uint64_t{m_} * m_;
    // pi (M + 2n) / (2 M^2), reduced in integer units of pi / (2 M^2).
    const std::uint64_t units = (m_ + 2 * (n % fine_count())) % (4 * mm);
    return static_cast<double>(units) * kPi / (2.0 * static_cast<double>(mm));
  }

  FineLabel fine_label(std::uint64_t n) const noexcept {
    const std::uint64_t mm = std::uint64_t{m_} * m_;
    n %= fine_count();
    const auto bit = static_cast<std::uint8_t>(n / mm);
    const std::uint64_t rest = n % mm;
    const auto i0 = static_cast<std::uint32_t>(rest / m_);
    const auto j0 = static_cast<std::uint32_t>(rest % m_);
    return {j0 + 1, (i0 + j0) % m_ + 1, bit};
  }

  std::uint64_t fine_index(std::uint32_t j, std::uint32_t k, std::uint8_t bit) const {
    check_index(j, "pattern");
    check_index(k, "running key");
    const std::uint32_t i0 = (k + m_ - j) % m_;
    return std::uint64_t{bit & 1u} * m_ * m_ + std::uint64_t{i0} * m_ + (j - 1);
  }

  void check_index(std::uint32_t v, const char* what) const {
    if (v < 1 || v > m_) {
      throw ArgumentError(std::string(what) + " index " + std::to_string(v) + " outside 1.." + std::to_string(m_));
    }
  }

  bool operator==(const Constellation&) const = default;

 private:
  std::uint32_t m_;
};

/// Running key k (1..M) to theta_k.
inline double deterministic_map(const Constellation& c, std::uint32_t k) { return c.base_phase(k); }

/// theta_{((k - j) mod M) + 1} + (j - 1) delta.
inline double pattern_map(const Constellation& c, std::uint32_t j, std::uint32_t k) {
  c.check_index(j, "pattern");
  c.check_index(k, "running key");
  const std::uint32_t i = (k + c.m() - j) % c.m() + 1;
  return c.base_phase(i) + (j - 1) * c.delta();
}

inline double signal_phase(double basis_phase, std::uint8_t data_bit) noexcept {
  return wrap_phase(data_bit ? basis_phase + kPi : basis_phase);
}

struct FinePoint {
  double phase;
  std::uint32_t j;
  std::uint32_t k;
  std::uint8_t bit;
};

/// Every (pattern, key, bit) signal point, sorted by phase in [0, 2pi).
inline std::vector<FinePoint> fine_constellation(const Constellation& c) {
  std::vector<FinePoint> pts;
  pts.reserve(c.fine_count());
  for (std::uint32_t j = 1; j <= c.m(); ++j) {
    for (std::uint32_t k = 1; k <= c.m(); ++k) {
      for (std::uint8_t bit = 0; bit < 2; ++bit) {
        pts.push_back({c.fine_phase(c.fine_index(j, k, bit)), j, k, bit});
      }
    }
  }
  std::sort(pts.begin(), pts.end(), [](const FinePoint& a, const FinePoint& b) { return a.phase < b.phase; });
  return pts;
}

}  // namespace y00
