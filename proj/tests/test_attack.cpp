#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "y00/attack.hpp"

using namespace y00;

namespace {

BitVector random_seed(Rng& rng, int degree) {
  BitVector s;
  do {
    s = rng.bits(static_cast<std::size_t>(degree));
  } while (std::none_of(s.begin(), s.end(), [](auto b) { return b != 0; }));
  return s;
}

BitVector bsc(const BitVector& clean, double p, Rng& rng) {
  BitVector out = clean;
  for (auto& b : out) b ^= rng.uniform() < p;
  return out;
}

struct Scenario {
  BitVector seed1, data;
  std::vector<SlotRecord> slots;
};

Scenario scenario(const LfsrSpec& s1, const std::optional<LfsrSpec>& s2, std::uint32_t m, std::size_t n,
                  const NoiseModel& noise, std::uint64_t seed) {
  Rng rng(seed);
  const Constellation c(m);
  const auto w = static_cast<std::size_t>(log2_exact(m));
  Scenario sc;
  sc.seed1 = random_seed(rng, s1.degree());
  sc.data = rng.bits(n);
  const auto rk1 = running_keys(lfsr_sequence(s1, sc.seed1, n * w), m);
  auto sent = s2 ? transmit(sc.data, rk1, running_keys(lfsr_sequence(*s2, random_seed(rng, s2->degree()), n * w), m), c)
                 : transmit(sc.data, rk1, c);
  sc.slots = measure(sent, noise, rng.next(), c);
  return sc;
}

}  // namespace

TEST(Bsc, EstimateAndFold) {
  const BitVector a{0, 0, 0, 0}, b{1, 0, 0, 0}, c{1, 1, 1, 0};
  auto e = estimate_crossover(a, b);
  EXPECT_DOUBLE_EQ(e.p, 0.25);
  EXPECT_DOUBLE_EQ(e.epsilon, 0.25);
  EXPECT_FALSE(e.folded);
  e = estimate_crossover(a, c);
  EXPECT_DOUBLE_EQ(e.p, 0.25);
  EXPECT_TRUE(e.folded);
  EXPECT_THROW(estimate_crossover(a, BitVector{1}), ArgumentError);
}

TEST(BinaryEntropy, Examples) {
  EXPECT_DOUBLE_EQ(binary_entropy(0.5), 1.0);
  EXPECT_DOUBLE_EQ(binary_entropy(0.0), 0.0);
  EXPECT_DOUBLE_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.25), oracle::entropy(0.25), 1e-14);
  EXPECT_NEAR(binary_entropy(0.25), 0.811278124459, 1e-12);
  for (double p = 0.01; p < 1.0; p += 0.01) EXPECT_NEAR(binary_entropy(p), oracle::entropy(p), 1e-13);
  EXPECT_THROW(binary_entropy(-0.1), ArgumentError);
  EXPECT_THROW(binary_entropy(1.1), ArgumentError);
}

TEST(Feasibility, Examples) {
  const auto f = feasibility(100, 3, 0.25);
  EXPECT_NEAR(f.capacity, 1.0 - oracle::entropy(0.25), 1e-14);
  EXPECT_NEAR(f.capacity, 0.188721875541, 1e-12);
  EXPECT_NEAR(f.n0, 529.880278656, 1e-8);
  EXPECT_EQ(required_length(0.05, 3), 100.0);
  const auto zero = feasibility(100, 3, 0.5);
  EXPECT_EQ(zero.capacity, 0.0);
  EXPECT_TRUE(std::isinf(zero.n0));
  EXPECT_TRUE(std::isinf(zero.required_n));
  EXPECT_TRUE(std::isinf(zero.log2_complexity));
  // Printed exponent K (1 - K/n0) and the observed-length variant.
  const auto g = feasibility(100, 3, 0.25, 1000.0);
  EXPECT_NEAR(g.log2_complexity, 2.0 + 100 * (1 - 100 / f.n0), 1e-9);
  EXPECT_NEAR(*g.log2_complexity_observed, 2.0 + 100 * (1 - 1000 / f.n0), 1e-9);
  EXPECT_THROW(feasibility(0, 3, 0.25), ArgumentError);
  EXPECT_THROW(feasibility(10, 1, 0.25), ArgumentError);
  EXPECT_THROW(feasibility(10, 3, 0.6), ArgumentError);
}

TEST(Feasibility, Monotone) {
  double prev_n0 = 0, prev_req = 0;
  for (int i = 1; i < 500; ++i) {
    const double p = i / 1000.0;
    const auto f = feasibility(64, 3, p);
    EXPECT_GT(f.n0, prev_n0);
    EXPECT_GT(f.required_n, prev_req);
    prev_n0 = f.n0;
    prev_req = f.required_n;
  }
}

TEST(DeriveKeystream, NoiselessDeterministicIsExact) {
  const LfsrSpec spec(17, {17, 3});
  for (std::uint32_t m : {2u, 4u, 16u, 64u}) {
    const auto sc = scenario(spec, std::nullopt, m, 300, NoiseModel::noiseless(), m);
    const auto w = static_cast<std::size_t>(log2_exact(m));
    const auto truth = lfsr_sequence(spec, sc.seed1, 300 * w);
    const auto d = derive_noisy_keystream(sc.slots, sc.data, Constellation(m), false, 0.0,
                                          std::span<const std::uint8_t>(truth));
    EXPECT_EQ(d.bits, truth);
    EXPECT_EQ(d.crossover->p, 0.0);
  }
  EXPECT_THROW(derive_noisy_keystream(std::vector<SlotRecord>(3), BitVector(2), Constellation(4), false), ArgumentError);
}

TEST(DeriveKeystream, FoldSymmetry) {
  const Constellation c(16);
  const auto sc = scenario(LfsrSpec(17, {17, 3}), LfsrSpec(23, {23, 5}), 16, 2000, NoiseModel::wedge(0.5), 3);
  auto flipped = sc.slots;
  BitVector comp = complement(sc.data);
  for (auto& s : flipped) s.measured_phase = wrap_phase(*s.measured_phase + kPi);
  for (bool randomized : {false, true}) {
    EXPECT_EQ(derive_noisy_keystream(sc.slots, sc.data, c, randomized, 0.5).bits,
              derive_noisy_keystream(flipped, comp, c, randomized, 0.5).bits);
  }
}

TEST(DeriveKeystream, GaussianDeterministicMatchesPrediction) {
  const std::uint32_t m = 4;
  const SignalParams p(2.0 * m * 0.6283 / kPi, m);
  const LfsrSpec spec(17, {17, 3});
  const auto sc = scenario(spec, std::nullopt, m, 100000, NoiseModel::gaussian(p.sigma()), 4);
  const auto truth = lfsr_sequence(spec, sc.seed1, 200000);
  const auto d = derive_noisy_keystream(sc.slots, sc.data, Constellation(m), false, 0.0,
                                        std::span<const std::uint8_t>(truth));
  const double pred = predicted_keystream_crossover(p);
  EXPECT_NEAR(d.crossover->p, pred, 3 * std::sqrt(pred * (1 - pred) / 200000) * 1.5);
}

// Randomized mapping under the wedge: the estimate is close to, but not at,
// the wedge model's 1/2 (1 - 1/M); wrong guesses land on neighbouring keys,
// whose bit differences average to 1/2 rather than to half a symbol error.
TEST(DeriveKeystream, WedgeRandomizedIsNearlyUseless) {
  const std::uint32_t m = 16;
  const double sigma = 2.0 * kTwoPi / m;
  const LfsrSpec spec(17, {17, 3});
  const auto sc = scenario(spec, LfsrSpec(23, {23, 5}), m, 100000, NoiseModel::wedge(sigma), 5);
  const auto truth = lfsr_sequence(spec, sc.seed1, 400000);
  const auto d = derive_noisy_keystream(sc.slots, sc.data, Constellation(m), true, sigma,
                                        std::span<const std::uint8_t>(truth));
  EXPECT_GT(d.crossover->p, 0.5 * (1 - 1.0 / m));
  EXPECT_LT(d.crossover->p, 0.5);
}

TEST(Ml, ExactRecoveryFromCleanPrefix) {
  Rng rng(6);
  for (const LfsrSpec& spec : {LfsrSpec(4, {4, 1}), LfsrSpec(10, {10, 3}), LfsrSpec(17, {17, 3})}) {
    const auto seed = random_seed(rng, spec.degree());
    const auto clean = lfsr_sequence(spec, seed, static_cast<std::size_t>(spec.degree()));
    const auto r = ml_bruteforce(clean, spec, std::span<const std::uint8_t>(seed));
    EXPECT_TRUE(r.success) << spec.to_string();
    EXPECT_EQ(*r.recovered_state, seed);
    EXPECT_EQ(r.residual_mismatch, 0.0);
    EXPECT_EQ(r.work_units, ((std::uint64_t{1} << spec.degree()) - 1) * static_cast<std::uint64_t>(spec.degree()));
  }
}

TEST(Ml, GuardsAndErrors) {
  EXPECT_THROW(ml_bruteforce(BitVector(100), LfsrSpec(25, {25, 3})), Refusal);
  EXPECT_THROW(ml_bruteforce(BitVector(5), LfsrSpec(10, {10, 3})), ArgumentError);
}

TEST(Ml, MatchesExplicitEnumeration) {
  Rng rng(7);
  const LfsrSpec spec(10, {10, 3});
  for (int t = 0; t < 10; ++t) {
    const auto seed = random_seed(rng, 10);
    const auto noisy = bsc(lfsr_sequence(spec, seed, 80), 0.3, rng);
    const auto r = ml_bruteforce(noisy, spec);
    std::size_t best_agree = 0;
    std::uint64_t best = 0;
    for (std::uint64_t s = 1; s < 1024; ++s) {
      const auto cand = oracle::recurrence(10, spec.taps(), register_from_index(s, 10), 80);
      const std::size_t agree = 80 - hamming_distance(cand, noisy);
      if (agree > best_agree) {
        best_agree = agree;
        best = s;
      }
    }
    EXPECT_EQ(register_index(*r.recovered_state), best);
    EXPECT_NEAR(r.residual_mismatch, (80.0 - best_agree) / 80.0, 1e-12);
  }
}

TEST(Ml, ChanceAtP049) {
  Rng rng(8);
  const LfsrSpec spec(17, {17, 3});
  int wins = 0;
  for (int t = 0; t < 50; ++t) {
    const auto seed = random_seed(rng, 17);
    const auto noisy = bsc(lfsr_sequence(spec, seed, 10000), 0.49, rng);
    wins += ml_bruteforce(noisy, spec, std::span<const std::uint8_t>(seed)).success;
  }
  // 3 sigma above 50 * 2^-17 is still below one success.
  EXPECT_EQ(wins, 0);
}

TEST(Fca, CleanInputNeedsNoIterations) {
  Rng rng(9);
  const LfsrSpec spec(31, {31, 3});
  const auto seed = random_seed(rng, 31);
  const auto clean = lfsr_sequence(spec, seed, 4000);
  FcaConfig cfg;
  cfg.crossover = 0.1;
  const auto r = fast_correlation(clean, spec, cfg, std::span<const std::uint8_t>(seed));
  EXPECT_EQ(r.iterations_used, 0u);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(*r.recovered_state, seed);
  EXPECT_EQ(r.residual_mismatch, 0.0);
}

TEST(Fca, RefusesTooFewChecks) {
  FcaConfig cfg;
  EXPECT_THROW(fast_correlation(BitVector(40), LfsrSpec(31, {31, 3}), cfg), Refusal);
  EXPECT_THROW(fast_correlation(BitVector(20), LfsrSpec(31, {31, 3}), cfg), Refusal);
  EXPECT_THROW(fast_correlation(BitVector(0), LfsrSpec(31, {31, 3}), cfg), ArgumentError);
  try {
    fast_correlation(BitVector(40), LfsrSpec(31, {31, 3}), cfg);
  } catch (const Refusal& e) {
    EXPECT_NE(std::string(e.what()).find("parity checks per bit"), std::string::npos);
  }
  cfg.crossover = 0.5;
  EXPECT_THROW(fast_correlation(BitVector(4000), LfsrSpec(31, {31, 3}), cfg), ArgumentError);
}

TEST(Fca, ParityChecksHold) {
  Rng rng(10);
  const LfsrSpec spec(17, {17, 3});
  const auto seq = lfsr_sequence(spec, random_seed(rng, 17), 3000);
  const auto pc = detail::build_parity_checks(spec, seq.size());
  ASSERT_GT(pc.count(), 0u);
  for (std::size_t c = 0; c < pc.count(); ++c) {
    std::uint8_t s = 0;
    for (std::size_t k = 0; k < pc.weight; ++k) s ^= seq[pc.positions[c * pc.weight + k]];
    ASSERT_EQ(s, 0) << "check " << c;
  }
}

TEST(Fca, RewindRecoversInitialState) {
  Rng rng(12);
  const LfsrSpec spec(13, {13, 4, 3, 1});
  const auto seed = random_seed(rng, 13);
  const auto seq = lfsr_sequence(spec, seed, 200);
  for (std::size_t off : {0u, 1u, 13u, 100u, 187u}) {
    const auto w = std::span<const std::uint8_t>(seq).subspan(off, 13);
    EXPECT_EQ(detail::rewind_state(spec, w, off), seed) << off;
  }
}

TEST(Fca, AgreesWithMlWhenItSucceeds) {
  Rng rng(13);
  const LfsrSpec spec(17, {17, 3});
  int fca_wins = 0;
  for (int t = 0; t < 8; ++t) {
    const auto seed = random_seed(rng, 17);
    const auto noisy = bsc(lfsr_sequence(spec, seed, 6000), 0.15, rng);
    FcaConfig cfg;
    cfg.crossover = 0.15;
    const auto f = fast_correlation(noisy, spec, cfg, std::span<const std::uint8_t>(seed));
    if (!f.success) continue;
    ++fca_wins;
    EXPECT_EQ(*f.recovered_state, *ml_bruteforce(noisy, spec).recovered_state);
  }
  EXPECT_GT(fca_wins, 0);
}

TEST(Fca, ChanceAtHalf) {
  Rng rng(14);
  const LfsrSpec spec(31, {31, 3});
  int wins = 0;
  for (int t = 0; t < 5; ++t) {
    const auto seed = random_seed(rng, 31);
    FcaConfig cfg;
    cfg.crossover = 0.45;
    cfg.max_iterations = 5;
    wins += fast_correlation(rng.bits(20000), spec, cfg, std::span<const std::uint8_t>(seed)).success;
  }
  EXPECT_EQ(wins, 0);
}

TEST(AttackReport, Json) {
  AttackReport r;
  r.method = AttackMethod::FCA;
  r.recovered_state = BitVector{1, 0, 1, 1};
  r.success = true;
  r.work_units = 12;
  const auto j = to_json(r);
  EXPECT_EQ(j["method"], "FCA");
  EXPECT_EQ(j["recovered_state"], "b");
  EXPECT_EQ(j["work_units"], 12);
  EXPECT_TRUE(j.contains("iterations_used"));
  EXPECT_TRUE(j.contains("parity_checks_used"));
  EXPECT_TRUE(j.contains("residual_mismatch"));
}

TEST(Equivocation, NoiselessDeterministicReachesZero) {
  const LfsrSpec spec(8, {8, 4, 3, 2});
  for (std::uint32_t m : {2u, 4u, 16u, 256u}) {
    const auto sc = scenario(spec, std::nullopt, m, 12, NoiseModel::noiseless(), 20 + m);
    const auto curve = key_equivocation(sc.slots, sc.data, spec, std::nullopt, NoiseModel::noiseless(), Constellation(m));
    ASSERT_EQ(curve.entropy_bits.size(), 13u);
    EXPECT_NEAR(curve.entropy_bits[0], std::log2(255.0), 1e-9);
    const int w = log2_exact(m);
    const std::size_t expect = static_cast<std::size_t>((8 + w - 1) / w);
    ASSERT_TRUE(curve.unicity_slots);
    EXPECT_EQ(*curve.unicity_slots, expect) << "M=" << m;
    for (std::size_t n = 1; n < curve.entropy_bits.size(); ++n) {
      EXPECT_LE(curve.entropy_bits[n], curve.entropy_bits[n - 1] + 1e-12);
      // Consistent seeds are equally likely: entropy = log2(count).
      const auto w_bits = static_cast<std::size_t>(w);
      std::size_t consistent = 0;
      for (std::uint64_t s = 1; s < 256; ++s) {
        const auto seq = oracle::recurrence(8, spec.taps(), register_from_index(s, 8), n * w_bits);
        const auto rk = running_keys(seq, m);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) ok = rk.symbols[i] + 1 == sc.slots[i].running_key;
        consistent += ok;
      }
      EXPECT_NEAR(curve.entropy_bits[n], std::log2(static_cast<double>(consistent)), 1e-9) << "M=" << m << " n=" << n;
    }
  }
}

TEST(Equivocation, SmallT0GaussianRandomizedStaysUncertain) {
  const std::uint32_t m = 16;
  const LfsrSpec spec(8, {8, 4, 3, 2});
  const SignalParams p(2.0 * m * 0.03 / kPi, m);  // t0 = 0.03
  const auto noise = NoiseModel::gaussian(p.sigma());
  const auto sc = scenario(spec, spec, m, 1000, noise, 30);
  const auto curve = key_equivocation(sc.slots, sc.data, spec, spec, noise, Constellation(m));
  EXPECT_GT(curve.entropy_bits.back(), 1.0);
  EXPECT_FALSE(curve.unicity_slots);
}

TEST(Equivocation, Guards) {
  const std::vector<SlotRecord> slots(3);
  const BitVector data(3);
  const Constellation c(4);
  EXPECT_THROW(key_equivocation(slots, data, LfsrSpec(21, {21, 2}), std::nullopt, NoiseModel::noiseless(), c), Refusal);
  EXPECT_THROW(key_equivocation(slots, data, LfsrSpec(11, {11, 2}), LfsrSpec(10, {10, 3}), NoiseModel::noiseless(), c),
               Refusal);
  EXPECT_THROW(key_equivocation(std::vector<SlotRecord>(1001), BitVector(1001), LfsrSpec(4, {4, 1}), std::nullopt,
                                NoiseModel::noiseless(), c),
               Refusal);
  EXPECT_THROW(key_equivocation(slots, BitVector(2), LfsrSpec(4, {4, 1}), std::nullopt, NoiseModel::noiseless(), c),
               ArgumentError);
}

TEST(Equivocation, CsvForm) {
  EquivocationCurve c{{2.0, 1.0, 0.0}, 2};
  std::ostringstream os;
  write_equivocation_csv(os, c);
  EXPECT_EQ(os.str(), "n,entropy_bits\n0,2\n1,1\n2,0\n");
}
