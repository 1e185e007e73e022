#pragma once

// Eve's known-plaintext toolkit: turn measured phases into a noisy copy of
// the basis-driving LFSR stream, then recover the LFSR's initial state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "y00/bits.hpp"
#include "y00/errors.hpp"
#include "y00/keystream.hpp"
#include "y00/mapping.hpp"
#include "y00/physical.hpp"

namespace y00 {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct BscEstimate {
  double p = 0.0;
  double epsilon = 0.5;
  std::size_t n_samples = 0;
  bool folded = false;  // raw disagreement was above 1/2; stream complemented
};

inline BscEstimate estimate_crossover(std::span<const std::uint8_t> observed, std::span<const std::uint8_t> truth) {
  if (observed.size() != truth.size()) throw ArgumentError("estimate_crossover: length mismatch");
  if (observed.empty()) throw ArgumentError("estimate_crossover: empty streams");
  BscEstimate est;
  est.n_samples = observed.size();
  est.p = static_cast<double>(hamming_distance(observed, truth)) / static_cast<double>(observed.size());
  if (est.p > 0.5) {
    est.p = 1.0 - est.p;
    est.folded = true;
  }
  est.epsilon = 0.5 - est.p;
  return est;
}

struct DerivedKeystream {
  BitVector bits;                     // Eve's estimate, log2(M) bits per slot, MSB first
  std::vector<std::uint32_t> keys;    // estimated running keys, 1..M
  std::optional<BscEstimate> crossover;
};

/// Strips the known data bit from each measured phase and reads off a
/// running-key estimate. With keyed patterns the pattern is marginalized:
/// the key is the one labelling the most fine points within +-window_sigma
/// of the folded measurement (first such key from the low end of the window
/// on ties; nearest fine point if the window holds none).
inline DerivedKeystream derive_noisy_keystream(std::span<const SlotRecord> slots,
                                               std::span<const std::uint8_t> plaintext, const Constellation& c,
                                               bool randomized, double window_sigma = 0.0,
                                               std::optional<std::span<const std::uint8_t>> truth = std::nullopt) {
  if (plaintext.size() != slots.size()) {
    throw ArgumentError("plaintext has " + std::to_string(plaintext.size()) + " bits for " +
                        std::to_string(slots.size()) + " slots");
  }
  DerivedKeystream out;
  out.keys.resize(slots.size());
  const double start = kPi / (2.0 * c.m());
  const double delta = c.delta();
  const auto fine = static_cast<std::int64_t>(c.fine_count());
  std::vector<std::uint32_t> counts(c.m());

  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double folded = wrap_phase(require_measured(slots[s]) - (plaintext[s] & 1u) * kPi);
    if (!randomized) {
      out.keys[s] = eve_nearest(folded, c, false).k;
      continue;
    }
    const auto lo = static_cast<std::int64_t>(std::ceil((folded - window_sigma - start) / delta));
    auto hi = static_cast<std::int64_t>(std::floor((folded + window_sigma - start) / delta));
    hi = std::min(hi, lo + fine - 1);
    if (window_sigma <= 0.0 || hi < lo) {
      out.keys[s] = eve_nearest(folded, c, true).k;
      continue;
    }
    std::fill(counts.begin(), counts.end(), 0u);
    std::uint32_t best = 0;
    for (std::int64_t n = lo; n <= hi; ++n) {
      const auto k = c.fine_label(static_cast<std::uint64_t>(((n % fine) + fine) % fine)).k;
      best = std::max(best, ++counts[k - 1]);
    }
    for (std::int64_t n = lo; n <= hi; ++n) {
      const auto k = c.fine_label(static_cast<std::uint64_t>(((n % fine) + fine) % fine)).k;
      if (counts[k - 1] == best) {
        out.keys[s] = k;
        break;
      }
    }
  }

  std::vector<std::uint32_t> symbols(out.keys.size());
  std::transform(out.keys.begin(), out.keys.end(), symbols.begin(), [](std::uint32_t k) { return k - 1; });
  out.bits = symbols_to_bits(symbols, c.m());
  if (truth) {
    if (truth->size() < out.bits.size()) throw ArgumentError("truth stream shorter than derived keystream");
    out.crossover = estimate_crossover(out.bits, truth->first(out.bits.size()));
  }
  return out;
}

/// Base-2 entropy with H(0) = H(1) = 0.
inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("binary_entropy: p outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// (1 / (2 epsilon))^(t - 1); infinite at epsilon = 0.
inline double required_length(double epsilon, int t) {
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw ArgumentError("epsilon outside [0, 1/2]");
  if (t < 2) throw ArgumentError("tap count t must be at least 2");
  if (epsilon == 0.0) return kInfinity;
  return std::pow(1.0 / (2.0 * epsilon), t - 1);
}

struct FeasibilityEstimate {
  double capacity = 0.0;
  double n0 = kInfinity;
  /// log2 of (1/2e)^(t-1) * 2^(K (1 - K/n0)), the exponent as printed.
  double log2_complexity = kInfinity;
  double required_n = kInfinity;
  /// Same with K (1 - N/n0) in the exponent, N the observed length.
  std::optional<double> log2_complexity_observed;
};

inline FeasibilityEstimate feasibility(int key_bits, int t, double p, std::optional<double> observed_n = std::nullopt) {
  if (key_bits < 1) throw ArgumentError("key_bits must be at least 1");
  if (t < 2) throw ArgumentError("tap count t must be at least 2");
  if (!(p >= 0.0 && p <= 0.5)) throw ArgumentError("crossover p must lie in [0, 1/2]");
  FeasibilityEstimate f;
  const double epsilon = 0.5 - p;
  const double k = key_bits;
  f.capacity = 1.0 - binary_entropy(p);
  f.n0 = f.capacity > 0.0 ? k / f.capacity : kInfinity;
  f.required_n = required_length(epsilon, t);
  if (epsilon > 0.0) {
    const double head = (t - 1) * std::log2(1.0 / (2.0 * epsilon));
    f.log2_complexity = head + k * (1.0 - k / f.n0);
    if (observed_n) f.log2_complexity_observed = head + k * (1.0 - *observed_n / f.n0);
  } else if (observed_n) {
    f.log2_complexity_observed = kInfinity;
  }
  return f;
}

enum class AttackMethod { ML, FCA };

struct AttackReport {
  AttackMethod method = AttackMethod::ML;
  std::optional<BitVector> recovered_state;
  bool success = false;
  std::size_t iterations_used = 0;
  std::size_t parity_checks_used = 0;
  double residual_mismatch = 1.0;
  std::uint64_t work_units = 0;
};

inline nlohmann::json to_json(const AttackReport& r) {
  nlohmann::json j;
  j["method"] = r.method == AttackMethod::ML ? "ML" : "FCA";
  j["success"] = r.success;
  j["recovered_state"] = r.recovered_state ? nlohmann::json(to_hex(*r.recovered_state)) : nlohmann::json(nullptr);
  j["iterations_used"] = r.iterations_used;
  j["parity_checks_used"] = r.parity_checks_used;
  j["residual_mismatch"] = std::stod(format_g12(r.residual_mismatch));
  j["work_units"] = r.work_units;
  return j;
}

inline constexpr int kMlDegreeGuard = 24;

/// Maximum-likelihood initial state over every non-zero seed.
///
/// Output bit n is the parity <g_n, s> of the seed, so the agreement of every
/// seed with the observation is one Walsh-Hadamard transform of the signed
/// histogram of g_n. The reported work_units are the nominal enumeration
/// budget (2^d - 1) * N.
inline AttackReport ml_bruteforce(std::span<const std::uint8_t> noisy, const LfsrSpec& spec,
                                  std::optional<std::span<const std::uint8_t>> truth = std::nullopt) {
  const int d = spec.degree();
  if (d > kMlDegreeGuard) {
    throw Refusal("ml_bruteforce: degree " + std::to_string(d) + " exceeds the enumeration guard of " +
                  std::to_string(kMlDegreeGuard) + " (2^" + std::to_string(d) + " candidate seeds)");
  }
  if (noisy.size() < static_cast<std::size_t>(d)) {
    throw ArgumentError("ml_bruteforce: need at least degree observed bits");
  }
  if (noisy.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ArgumentError("ml_bruteforce: observation too long");
  }
  const std::size_t size = std::size_t{1} << d;
  std::vector<std::int32_t> score(size, 0);
  const auto masks = output_functionals(spec, noisy.size());
  for (std::size_t n = 0; n < noisy.size(); ++n) score[masks[n]] += (noisy[n] & 1u) ? -1 : 1;
  for (std::size_t h = 1; h < size; h <<= 1) {
    for (std::size_t i = 0; i < size; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const std::int32_t a = score[j], b = score[j + h];
        score[j] = a + b;
        score[j + h] = a - b;
      }
    }
  }
  std::size_t best = 1;
  for (std::size_t s = 2; s < size; ++s) {
    if (score[s] > score[best]) best = s;
  }
  AttackReport r;
  r.method = AttackMethod::ML;
  r.recovered_state = register_from_index(best, d);
  const double n = static_cast<double>(noisy.size());
  r.residual_mismatch = (n - score[best]) / (2.0 * n);
  r.work_units = static_cast<std::uint64_t>(size - 1) * noisy.size();
  if (truth) r.success = std::equal(truth->begin(), truth->end(), r.recovered_state->begin(), r.recovered_state->end());
  return r;
}

struct FcaConfig {
  int max_iterations = 20;
  int parity_rounds = 5;
  double crossover = 0.25;  // channel prior used by the decoder
  std::size_t window_tries = 16;
};

namespace detail {

/// Parity checks of the feedback polynomial and its squarings that fit in
/// [0, n): positions m - 2^s e for e in taps U {0}, for m >= 2^s degree.
struct ParityChecks {
  std::size_t weight = 0;
  std::vector<std::uint32_t> positions;  // weight entries per check
  std::vector<std::uint32_t> bit_start;  // CSR over bits -> edge indices
  std::vector<std::uint32_t> bit_edges;

  std::size_t count() const noexcept { return weight ? positions.size() / weight : 0; }
};

inline ParityChecks build_parity_checks(const LfsrSpec& spec, std::size_t n) {
  ParityChecks pc;
  std::vector<std::uint64_t> exps(spec.taps().begin(), spec.taps().end());
  exps.push_back(0);
  pc.weight = exps.size();
  const auto d = static_cast<std::uint64_t>(spec.degree());
  for (std::uint64_t scale = 1; scale * d < n; scale <<= 1) {
    for (std::uint64_t m = scale * d; m < n; ++m) {
      for (auto e : exps) pc.positions.push_back(static_cast<std::uint32_t>(m - scale * e));
    }
  }
  pc.bit_start.assign(n + 1, 0);
  for (auto p : pc.positions) ++pc.bit_start[p + 1];
  for (std::size_t i = 0; i < n; ++i) pc.bit_start[i + 1] += pc.bit_start[i];
  pc.bit_edges.resize(pc.positions.size());
  std::vector<std::uint32_t> fill(pc.bit_start.begin(), pc.bit_start.end() - 1);
  for (std::size_t e = 0; e < pc.positions.size(); ++e) pc.bit_edges[fill[pc.positions[e]]++] = static_cast<std::uint32_t>(e);
  return pc;
}

/// Steps the recurrence backwards from the register at time `offset`.
inline BitVector rewind_state(const LfsrSpec& spec, std::span<const std::uint8_t> window, std::size_t offset) {
  const auto d = static_cast<std::size_t>(spec.degree());
  // buf[offset + i] holds a[offset + i]; fill downwards.
  std::vector<std::uint8_t> buf(offset + d);
  std::copy(window.begin(), window.end(), buf.begin() + static_cast<std::ptrdiff_t>(offset));
  for (std::size_t n = offset; n-- > 0;) {
    std::uint8_t v = buf[n + d];
    for (int e : spec.taps()) {
      if (e != spec.degree()) v ^= buf[n + d - static_cast<std::size_t>(e)];
    }
    buf[n] = v;
  }
  return BitVector(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(d));
}

}  // namespace detail

/// Iterative probabilistic decoding of the noisy stream as a corrupted LFSR
/// codeword. Each outer iteration runs `parity_rounds` of belief propagation
/// over the low-weight checks, flips the bits whose posterior error
/// probability passes 1/2, and stops once every check holds, the unsatisfied
/// count stops falling, or max_iterations is reached. The initial state is
/// then rewound from the most reliable register-length window and accepted
/// if its regenerated stream agrees with the input on at least
/// N (1 - p - 3 sqrt(p (1 - p) / N)) positions.
inline AttackReport fast_correlation(std::span<const std::uint8_t> noisy, const LfsrSpec& spec, const FcaConfig& cfg,
                                     std::optional<std::span<const std::uint8_t>> truth = std::nullopt) {
  const auto d = static_cast<std::size_t>(spec.degree());
  const std::size_t n = noisy.size();
  if (n == 0) throw ArgumentError("fast_correlation: empty observation");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("fast_correlation: observation too long");
  if (!(cfg.crossover >= 0.0 && cfg.crossover < 0.5)) throw ArgumentError("fast_correlation: crossover must be in [0, 1/2)");
  if (cfg.max_iterations < 0 || cfg.parity_rounds < 1) throw ArgumentError("fast_correlation: bad iteration limits");

  const auto pc = detail::build_parity_checks(spec, n);
  const std::size_t checks = pc.count();
  const std::size_t w = pc.weight;
  const double per_bit = static_cast<double>(pc.positions.size()) / static_cast<double>(n);
  if (per_bit < 3.0) {
    throw Refusal("fast_correlation: only " + format_g12(per_bit) + " parity checks per bit for degree " +
                  std::to_string(d) + " over " + std::to_string(n) + " bits (need >= 3); observe a longer stream");
  }
  if (n < 10 * d) throw ArgumentError("fast_correlation: need at least 10 * degree observed bits");

  AttackReport r;
  r.method = AttackMethod::FCA;
  r.parity_checks_used = checks;

  const double p = std::clamp(cfg.crossover, 1e-9, 0.5 - 1e-9);
  const double prior = std::log((1.0 - p) / p);  // LLR that a bit is correct
  constexpr double kClamp = 30.0;

  BitVector z(noisy.begin(), noisy.end());
  for (auto& b : z) b &= 1u;
  std::vector<std::uint8_t> syndrome(checks);
  auto unsatisfied = [&] {
    std::size_t bad = 0;
    for (std::size_t c = 0; c < checks; ++c) {
      std::uint8_t s = 0;
      for (std::size_t k = 0; k < w; ++k) s ^= z[pc.positions[c * w + k]];
      syndrome[c] = s;
      bad += s;
    }
    r.work_units += checks * w;
    return bad;
  };

  std::vector<double> to_check(pc.positions.size()), to_bit(pc.positions.size()), posterior(n, prior);
  std::vector<double> th(w);
  std::size_t bad = unsatisfied();
  std::size_t iterations = 0;
  while (bad > 0 && iterations < static_cast<std::size_t>(cfg.max_iterations)) {
    ++iterations;
    std::fill(to_bit.begin(), to_bit.end(), 0.0);
    std::fill(posterior.begin(), posterior.end(), prior);
    for (int round = 0; round < cfg.parity_rounds; ++round) {
      for (std::size_t e = 0; e < to_check.size(); ++e) {
        to_check[e] = std::clamp(posterior[pc.positions[e]] - to_bit[e], -kClamp, kClamp);
      }
      for (std::size_t c = 0; c < checks; ++c) {
        for (std::size_t k = 0; k < w; ++k) th[k] = std::tanh(0.5 * to_check[c * w + k]);
        const double sign = syndrome[c] ? -1.0 : 1.0;
        for (std::size_t k = 0; k < w; ++k) {
          double prod = sign;
          for (std::size_t o = 0; o < w; ++o) {
            if (o != k) prod *= th[o];
          }
          prod = std::clamp(prod, -0.999999999999, 0.999999999999);
          to_bit[c * w + k] = 2.0 * std::atanh(prod);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        double l = prior;
        for (std::uint32_t k = pc.bit_start[i]; k < pc.bit_start[i + 1]; ++k) l += to_bit[pc.bit_edges[k]];
        posterior[i] = l;
      }
      r.work_units += 2 * pc.positions.size();
    }
    std::size_t flips = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (posterior[i] < 0.0) {
        z[i] ^= 1u;
        posterior[i] = -posterior[i];
        ++flips;
      }
    }
    const std::size_t prev = bad;
    bad = unsatisfied();
    if (flips == 0 || bad >= prev) break;
  }
  r.iterations_used = iterations;

  // Candidate windows at stride d, most reliable first.
  std::vector<std::pair<double, std::size_t>> windows;
  for (std::size_t start = 0; start + d <= n; start += d) {
    double score = 0.0;
    for (std::size_t i = start; i < start + d; ++i) score += std::abs(posterior[i]);
    windows.emplace_back(-score, start);
  }
  if (bad == 0) windows.insert(windows.begin(), {-kInfinity, 0});
  std::stable_sort(windows.begin() + (bad == 0 ? 1 : 0), windows.end());

  const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  const double needed = static_cast<double>(n) * (1.0 - p - 3.0 * sd);
  double best_mismatch = 1.0;
  for (std::size_t t = 0; t < std::min(cfg.window_tries, windows.size()); ++t) {
    const std::size_t start = windows[t].second;
    const auto window = std::span<const std::uint8_t>(z).subspan(start, d);
    if (std::none_of(window.begin(), window.end(), [](std::uint8_t b) { return b != 0; })) continue;
    BitVector state = detail::rewind_state(spec, window, start);
    if (std::none_of(state.begin(), state.end(), [](std::uint8_t b) { return b != 0; })) continue;
    const auto regenerated = lfsr_sequence(spec, state, n);
    r.work_units += n + start * static_cast<std::size_t>(spec.tap_count());
    const auto mismatches = static_cast<double>(hamming_distance(regenerated, noisy));
    best_mismatch = std::min(best_mismatch, mismatches / static_cast<double>(n));
    if (static_cast<double>(n) - mismatches >= needed) {
      r.recovered_state = std::move(state);
      r.residual_mismatch = mismatches / static_cast<double>(n);
      break;
    }
  }
  if (!r.recovered_state) r.residual_mismatch = checks ? static_cast<double>(bad) / static_cast<double>(checks) : 1.0;
  if (truth && r.recovered_state) {
    r.success = std::equal(truth->begin(), truth->end(), r.recovered_state->begin(), r.recovered_state->end());
  }
  return r;
}

struct EquivocationCurve {
  std::vector<double> entropy_bits;  // index n = slots observed, 0..N
  std::optional<std::size_t> unicity_slots;
};

inline void write_equivocation_csv(std::ostream& os, const EquivocationCurve& curve) {
  os << "n,entropy_bits\n";
  for (std::size_t n = 0; n < curve.entropy_bits.size(); ++n) os << n << ',' << format_g12(curve.entropy_bits[n]) << '\n';
}

inline constexpr std::uint64_t kEquivocationKeyGuard = std::uint64_t{1} << 20;
inline constexpr std::size_t kEquivocationSlotGuard = 1000;

namespace detail {

/// log density of observing `measured` when `predicted` was sent.
inline double log_observation_density(const NoiseModel& noise, double measured, double predicted,
                                      const Constellation& c) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double diff = wrap_phase(measured - predicted);
  if (diff > kPi) diff -= kTwoPi;
  switch (noise.kind) {
    case NoiseKind::Noiseless:
      return std::abs(diff) < 1e-9 ? 0.0 : kNegInf;
    case NoiseKind::GaussianPhase: {
      const int wraps = static_cast<int>(std::ceil(8.0 * noise.sigma / kTwoPi)) + 1;
      double sum = 0.0;
      for (int k = -wraps; k <= wraps; ++k) {
        const double x = (diff + k * kTwoPi) / noise.sigma;
        sum += std::exp(-0.5 * x * x);
      }
      return sum > 0.0 ? std::log(sum / (noise.sigma * std::sqrt(kTwoPi))) : kNegInf;
    }
    case NoiseKind::Wedge: {
      const int wraps = static_cast<int>(std::ceil(noise.sigma / kTwoPi)) + 1;
      int hits = 0;
      for (int k = -wraps; k <= wraps; ++k) hits += std::abs(diff + k * kTwoPi) <= noise.sigma * (1 + 1e-12);
      return hits ? std::log(hits / (2.0 * noise.sigma)) : kNegInf;
    }
    case NoiseKind::DiscreteNeighbor: {
      const auto ring = static_cast<std::int64_t>(c.coarse_count());
      const auto off = static_cast<std::int64_t>(std::llround(diff / c.spacing()));
      double prob = 0.0;
      for (int e = -2; e <= 2; ++e) {
        if ((((e - off) % ring) + ring) % ring == 0) prob += noise.neighbor_probs[static_cast<std::size_t>(e + 2)];
      }
      return prob > 0.0 ? std::log(prob) : kNegInf;
    }
  }
  return kNegInf;
}

inline std::vector<std::uint16_t> key_table(const LfsrSpec& spec, std::size_t slots, std::uint32_t m) {
  const std::uint64_t seeds = (std::uint64_t{1} << spec.degree()) - 1;
  const auto w = static_cast<std::size_t>(log2_exact(m));
  std::vector<std::uint16_t> table(seeds * slots);
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const auto rk = running_keys(lfsr_sequence(spec, register_from_index(s, spec.degree()), slots * w), m);
    for (std::size_t n = 0; n < slots; ++n) table[(s - 1) * slots + n] = static_cast<std::uint16_t>(rk.symbols[n]);
  }
  return table;
}

}  // namespace detail

/// Exact posterior over every non-zero seed of the basis LFSR (and of the
/// pattern LFSR when given), uniform prior, after each observed slot.
/// The unicity point is the first n with entropy below 1e-9 bits.
inline EquivocationCurve key_equivocation(std::span<const SlotRecord> slots, std::span<const std::uint8_t> plaintext,
                                          const LfsrSpec& spec1, const std::optional<LfsrSpec>& spec2,
                                          const NoiseModel& noise, const Constellation& c) {
  if (plaintext.size() != slots.size()) throw ArgumentError("key_equivocation: plaintext/slot length mismatch");
  if (spec1.degree() > 20 || (spec2 && spec2->degree() > 20)) {
    throw Refusal("key_equivocation: key space exceeds 2^20 joint seeds");
  }
  const std::uint64_t s1 = (std::uint64_t{1} << spec1.degree()) - 1;
  const std::uint64_t s2 = spec2 ? (std::uint64_t{1} << spec2->degree()) - 1 : 1;
  if (s1 * s2 > kEquivocationKeyGuard) {
    throw Refusal("key_equivocation: " + std::to_string(s1 * s2) + " joint seeds exceed the 2^20 guard");
  }
  if (slots.size() > kEquivocationSlotGuard) {
    throw Refusal("key_equivocation: more than " + std::to_string(kEquivocationSlotGuard) + " slots");
  }
  if (noise.kind == NoiseKind::DiscreteNeighbor && spec2) {
    throw ConfigError("discrete-neighbor noise is defined on the coarse basis grid only");
  }
  const std::size_t slots_n = slots.size();
  const std::uint32_t m = c.m();
  const auto keys = detail::key_table(spec1, slots_n, m);
  const auto patterns = spec2 ? detail::key_table(*spec2, slots_n, m) : std::vector<std::uint16_t>(slots_n, 0);

  std::vector<double> logpost(s1 * s2, 0.0);
  std::vector<double> table(std::size_t{m} * m);
  EquivocationCurve curve;
  curve.entropy_bits.reserve(slots_n + 1);

  auto entropy = [&] {
    const double top = *std::max_element(logpost.begin(), logpost.end());
    if (!std::isfinite(top)) throw ArgumentError("key_equivocation: observations exclude every key");
    double z = 0.0, acc = 0.0;
    for (double l : logpost) {
      if (!std::isfinite(l)) continue;
      const double x = l - top;
      const double e = std::exp(x);
      z += e;
      acc += e * x;
    }
    // H = log z - E[x], converted to bits.
    return std::max(0.0, (std::log(z) - acc / z) / std::numbers::ln2);
  };

  curve.entropy_bits.push_back(entropy());
  for (std::size_t n = 0; n < slots_n; ++n) {
    const double measured = require_measured(slots[n]);
    const std::uint32_t jmax = spec2 ? m : 1;
    for (std::uint32_t k = 1; k <= m; ++k) {
      for (std::uint32_t j = 1; j <= jmax; ++j) {
        const double predicted = signal_phase(pattern_map(c, j, k), plaintext[n] & 1u);
        table[(k - 1) * m + (j - 1)] = detail::log_observation_density(noise, measured, predicted, c);
      }
    }
    for (std::uint64_t a = 0; a < s1; ++a) {
      const std::uint32_t k0 = keys[a * slots_n + n];
      double* row = logpost.data() + a * s2;
      for (std::uint64_t b = 0; b < s2; ++b) row[b] += table[k0 * m + patterns[b * slots_n + n]];
    }
    curve.entropy_bits.push_back(entropy());
    if (!curve.unicity_slots && curve.entropy_bits.back() < 1e-9) curve.unicity_slots = n + 1;
  }
  return curve;
}

}  // namespace y00
