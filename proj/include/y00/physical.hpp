#pragma once

// Transmitter, measurement-noise channels, and the two receivers.
//
// Phase noise is calibrated as sigma = 1 / alpha so that half the neighbour
// spacing over sigma is t0 = pi alpha / (2M), the argument of the heterodyne
// neighbour-error formula.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "y00/errors.hpp"
#include "y00/keystream.hpp"
#include "y00/mapping.hpp"
#include "y00/rng.hpp"

namespace y00 {

struct SignalParams {
  double alpha;
  std::uint32_t m;

  SignalParams(double alpha_, std::uint32_t m_) : alpha(alpha_), m(m_) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive and finite");
    if (m < 2) throw ConfigError("M must be at least 2");
  }

  double sigma() const noexcept { return 1.0 / alpha; }
  double t0() const noexcept { return kPi * alpha / (2.0 * m); }
};

/// Keys stay hidden when sigma exceeds 2M delta = 2 pi / M, equivalently
/// alpha < M / (2 pi).
inline bool keys_masked_by_noise(const SignalParams& p) noexcept { return p.alpha < p.m / kTwoPi; }

enum class NoiseKind { Noiseless, GaussianPhase, Wedge, DiscreteNeighbor };

inline const char* to_string(NoiseKind k) noexcept {
  switch (k) {
    case NoiseKind::Noiseless: return "noiseless";
    case NoiseKind::GaussianPhase: return "gaussian";
    case NoiseKind::Wedge: return "wedge";
    case NoiseKind::DiscreteNeighbor: return "discrete";
  }
  return "?";
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct NoiseModel {
  NoiseKind kind = NoiseKind::Noiseless;
  double sigma = 0.0;
  // Offsets e = -2..2 at indices 0..4.
  std::array<double, 5> neighbor_probs{0, 0, 1, 0, 0};

  static NoiseModel noiseless() { return {}; }

  static NoiseModel gaussian(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian noise needs sigma > 0");
    return {NoiseKind::GaussianPhase, sigma, {0, 0, 1, 0, 0}};
  }

  /// Uniform on [-sigma, +sigma].
  static NoiseModel wedge(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("wedge noise needs sigma > 0");
    return {NoiseKind::Wedge, sigma, {0, 0, 1, 0, 0}};
  }

  /// p0, p1, p2 are the probabilities of staying put and of moving by
  /// +-1 and +-2 basis positions in each direction.
  static NoiseModel discrete(double p0, double p1, double p2) {
    const std::array<double, 5> probs{p2, p1, p0, p1, p2};
    for (double p : probs) {
      if (!(p >= 0.0)) throw ConfigError("neighbor probabilities must be non-negative");
    }
    if (std::abs(p0 + 2 * p1 + 2 * p2 - 1.0) > 1e-9) {
      throw ConfigError("neighbor probabilities must sum to 1 (p0 + 2 p1 + 2 p2)");
    }
    return {NoiseKind::DiscreteNeighbor, 0.0, probs};
  }

  /// Gaussian mass of each decision region at the given t0, truncated at
  /// |e| = 2 and renormalized.
  static NoiseModel discrete_from_gaussian(double t0) {
    if (!(t0 > 0.0)) throw ConfigError("t0 must be positive");
    // Region e spans [(2e - 1) t0, (2e + 1) t0] in units of sigma.
    auto mass = [&](int e) { return normal_cdf((2 * e + 1) * t0) - normal_cdf((2 * e - 1) * t0); };
    const double p0 = mass(0), p1 = mass(1), p2 = mass(2);
    const double total = p0 + 2 * p1 + 2 * p2;
    return discrete(p0 / total, p1 / total, p2 / total);
  }

  /// Model named by a config selector, calibrated from the signal.
  static NoiseModel from_selector(const std::string& name, const SignalParams& p) {
    if (name == "noiseless") return noiseless();
    if (name == "gaussian") return gaussian(p.sigma());
    if (name == "wedge") return wedge(p.sigma());
    if (name == "discrete") return discrete_from_gaussian(p.t0());
    throw ConfigError("unknown noise model '" + name + "' (noiseless|gaussian|wedge|discrete)");
  }
};

struct SlotRecord {
  std::size_t index = 0;
  std::uint8_t data_bit = 0;
  std::uint32_t running_key = 1;    // 1..M
  std::uint32_t pattern_index = 1;  // 1..M
  double true_phase = 0.0;
  std::optional<double> measured_phase;

  bool operator==(const SlotRecord&) const = default;
};

namespace detail {

inline std::vector<SlotRecord> transmit_impl(std::span<const std::uint8_t> data, const RunningKeySequence& rk1,
                                             const RunningKeySequence* rk2, const Constellation& c) {
  if (rk1.m != c.m() || (rk2 && rk2->m != c.m())) throw ArgumentError("running-key modulus differs from M");
  if (data.size() != rk1.size() || (rk2 && rk2->size() != data.size())) {
    throw ArgumentError("transmit: data has " + std::to_string(data.size()) + " bits but running keys have " +
                        std::to_string(rk1.size()) + (rk2 ? "/" + std::to_string(rk2->size()) : std::string()));
  }
  std::vector<SlotRecord> slots(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& s = slots[i];
    s.index = i;
    s.data_bit = data[i] & 1u;
    s.running_key = rk1.symbols[i] + 1;
    s.pattern_index = rk2 ? rk2->symbols[i] + 1 : 1;
    s.true_phase = signal_phase(pattern_map(c, s.pattern_index, s.running_key), s.data_bit);
  }
  return slots;
}

}  // namespace detail

/// Deterministic mapping: pattern 1 in every slot.
inline std::vector<SlotRecord> transmit(std::span<const std::uint8_t> data, const RunningKeySequence& rk1,
                                        const Constellation& c) {
  return detail::transmit_impl(data, rk1, nullptr, c);
}

/// Keyed randomization: pattern j = rk2 symbol + 1.
inline std::vector<SlotRecord> transmit(std::span<const std::uint8_t> data, const RunningKeySequence& rk1,
                                        const RunningKeySequence& rk2, const Constellation& c) {
  return detail::transmit_impl(data, rk1, &rk2, c);
}

/// Slots are processed in fixed blocks, block b drawing from
/// derive_seed(seed, b), so the result is independent of `workers`.
inline constexpr std::size_t kMeasureBlock = 4096;

inline std::vector<SlotRecord> measure(std::span<const SlotRecord> slots, const NoiseModel& noise,
                                       std::uint64_t rng_seed, const Constellation& c, unsigned workers = 1) {
  if (noise.kind == NoiseKind::DiscreteNeighbor) {
    for (const auto& s : slots) {
      if (s.pattern_index != 1) {
        throw ConfigError("discrete-neighbor noise is defined on the coarse basis grid only; slot " +
                          std::to_string(s.index) + " uses pattern " + std::to_string(s.pattern_index));
      }
    }
  }
  if ((noise.kind == NoiseKind::GaussianPhase || noise.kind == NoiseKind::Wedge) && !(noise.sigma > 0.0)) {
    throw ConfigError("noise sigma must be positive");
  }
  std::vector<SlotRecord> out(slots.begin(), slots.end());
  const std::size_t blocks = (out.size() + kMeasureBlock - 1) / kMeasureBlock;

  auto run_block = [&](std::size_t b) {
    Rng rng(derive_seed(rng_seed, b));
    const std::size_t end = std::min(out.size(), (b + 1) * kMeasureBlock);
    for (std::size_t i = b * kMeasureBlock; i < end; ++i) {
      auto& s = out[i];
      switch (noise.kind) {
        case NoiseKind::Noiseless:
          s.measured_phase = s.true_phase;
          break;
        case NoiseKind::GaussianPhase:
          s.measured_phase = wrap_phase(s.true_phase + noise.sigma * rng.normal());
          break;
        case NoiseKind::Wedge:
          s.measured_phase = wrap_phase(s.true_phase + rng.uniform(-noise.sigma, noise.sigma));
          break;
        case NoiseKind::DiscreteNeighbor: {
          double u = rng.uniform();
          int e = 2;
          for (int idx = 0; idx < 5; ++idx) {
            u -= noise.neighbor_probs[static_cast<std::size_t>(idx)];
            if (u < 0.0) {
              e = idx - 2;
              break;
            }
          }
          const std::uint32_t r = s.data_bit * c.m() + (s.running_key - 1);
          const auto n = static_cast<std::int64_t>(c.coarse_count());
          s.measured_phase = c.coarse_phase(static_cast<std::uint32_t>(((r + e) % n + n) % n));
          break;
        }
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
  }
  return out;
}

/// 1/2 - integral_0^t0 phi(t) dt, the chance of crossing into the upper
/// neighbour's decision region.
inline double neighbor_error_prob(const SignalParams& p) noexcept { return 0.5 * std::erfc(p.t0() / std::numbers::sqrt2); }

/// |<alpha e^{i a} | alpha e^{i b}>|^2.
inline double coherent_overlap(const SignalParams& p, double phase_a, double phase_b) noexcept {
  const double s = std::sin(0.5 * (phase_a - phase_b));
  return std::exp(-4.0 * p.alpha * p.alpha * s * s);
}

inline double require_measured(const SlotRecord& slot) {
  if (!slot.measured_phase) throw ArgumentError("slot " + std::to_string(slot.index) + " has not been measured");
  return *slot.measured_phase;
}

/// Binary decision with both keys known. A measurement exactly pi/2 from the
/// keyed basis decodes as 1.
inline std::uint8_t bob_decode(const SlotRecord& slot, std::uint32_t running_key, std::uint32_t pattern_index,
                               const Constellation& c) {
  const double basis = pattern_map(c, pattern_index, running_key);
  return phase_distance(require_measured(slot), basis) < kPi / 2 ? 0 : 1;
}

struct EveEstimate {
  std::uint32_t k;
  std::optional<std::uint32_t> j;
  std::uint8_t bit;
};

/// Index of the nearest point of a uniform grid start + n*step (n mod count);
/// an exact midpoint goes to the lower index.
inline std::uint64_t nearest_grid_index(double phase, double start, double step, std::uint64_t count) noexcept {
  const double x = (wrap_phase(phase) - start) / step;
  auto n = static_cast<std::int64_t>(std::ceil(x - 0.5));
  const auto cnt = static_cast<std::int64_t>(count);
  return static_cast<std::uint64_t>(((n % cnt) + cnt) % cnt);
}

/// Keyless nearest-point decision: over the 2M coarse points for the
/// deterministic mapping, over all 2M^2 fine points when patterns are keyed.
inline EveEstimate eve_nearest(double measured_phase, const Constellation& c, bool randomized) {
  const double start = kPi / (2.0 * c.m());
  if (!randomized) {
    const auto r = static_cast<std::uint32_t>(nearest_grid_index(measured_phase, start, c.spacing(), c.coarse_count()));
    return {r % c.m() + 1, std::nullopt, static_cast<std::uint8_t>(r / c.m())};
  }
  const auto label = c.fine_label(nearest_grid_index(measured_phase, start, c.delta(), c.fine_count()));
  return {label.k, label.j, label.bit};
}

/// P(decision offset = r mod 2M) on the coarse ring under Gaussian phase
/// noise, r = 0..2M-1.
inline std::vector<double> coarse_offset_distribution(const SignalParams& p) {
  const std::uint32_t ring = 2 * p.m;
  const double half = p.t0();  // half spacing in units of sigma
  const double ring_len = static_cast<double>(ring) * 2.0 * half;
  const int wraps = static_cast<int>(std::ceil(10.0 / ring_len)) + 1;
  std::vector<double> dist(ring, 0.0);
  for (std::uint32_t r = 0; r < ring; ++r) {
    // Centre offsets r, r - ring, ... folded to (-M, M].
    for (int w = -wraps; w <= wraps; ++w) {
      const double e = static_cast<double>(r) + static_cast<double>(w) * ring;
      dist[r] += normal_cdf((2 * e + 1) * half) - normal_cdf((2 * e - 1) * half);
    }
  }
  return dist;
}

/// Expected error rate of each running-key bit (index 0 = least significant)
/// when Eve reads the deterministic mapping through Gaussian noise.
inline std::vector<double> predicted_keystream_bit_errors(const SignalParams& p) {
  const auto dist = coarse_offset_distribution(p);
  const int w = log2_exact(p.m);
  std::vector<double> rates(static_cast<std::size_t>(w), 0.0);
  for (std::uint32_t r = 0; r < dist.size(); ++r) {
    for (std::uint32_t k = 0; k < p.m; ++k) {
      const std::uint32_t flipped = k ^ ((k + r) % p.m);
      for (int b = 0; b < w; ++b) {
        if ((flipped >> b) & 1u) rates[static_cast<std::size_t>(b)] += dist[r] / p.m;
      }
    }
  }
  return rates;
}

inline double predicted_keystream_crossover(const SignalParams& p) {
  const auto rates = predicted_keystream_bit_errors(p);
  double sum = 0;
  for (double r : rates) sum += r;
  return sum / static_cast<double>(rates.size());
}

/// Signal amplitude at which Eve's mean keystream crossover under Gaussian
/// noise and deterministic mapping equals `target` (bisection on log alpha).
inline double alpha_for_crossover(double target, std::uint32_t m) {
  double lo = 1e-3, hi = 1e4;
  if (!(target > predicted_keystream_crossover(SignalParams(hi, m)) &&
        target < predicted_keystream_crossover(SignalParams(lo, m)))) {
    throw ArgumentError("crossover target out of reach for M=" + std::to_string(m));
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (predicted_keystream_crossover(SignalParams(mid, m)) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

// Slot traces as CSV.

inline std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_slot_csv(std::ostream& os, std::span<const SlotRecord> slots) {
  os << "index,data_bit,running_key,pattern_index,true_phase,measured_phase\n";
  for (const auto& s : slots) {
    os << s.index << ',' << int{s.data_bit} << ',' << s.running_key << ',' << s.pattern_index << ','
       << format_g12(s.true_phase) << ',' << (s.measured_phase ? format_g12(*s.measured_phase) : std::string()) << '\n';
  }
}

inline std::vector<SlotRecord> read_slot_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  // Leading '#' lines carry provenance and are skipped.
  while (std::getline(is, line) && !line.empty() && line[0] == '#') ++lineno;
  if (!is || line != "index,data_bit,running_key,pattern_index,true_phase,measured_phase") {
    throw ArgumentError("slot trace: missing or unexpected header");
  }
  std::vector<SlotRecord> slots;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 6) throw ArgumentError("slot trace line " + std::to_string(lineno) + ": expected 6 columns");
    try {
      SlotRecord s;
      s.index = std::stoull(cols[0]);
      s.data_bit = static_cast<std::uint8_t>(std::stoi(cols[1]));
      s.running_key = static_cast<std::uint32_t>(std::stoul(cols[2]));
      s.pattern_index = static_cast<std::uint32_t>(std::stoul(cols[3]));
      s.true_phase = std::stod(cols[4]);
      if (!cols[5].empty()) s.measured_phase = std::stod(cols[5]);
      slots.push_back(s);
    } catch (const std::logic_error&) {
      throw ArgumentError("slot trace line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return slots;
}

}  // namespace y00
