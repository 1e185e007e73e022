#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "y00/mapping.hpp"

using namespace y00;

namespace {
constexpr double kTol = 1e-12;
}

TEST(Constellation, BasePhases) {
  const Constellation c(4);
  EXPECT_NEAR(deterministic_map(c, 1), kPi / 8, kTol);
  EXPECT_NEAR(deterministic_map(c, 4), 7 * kPi / 8, kTol);
  EXPECT_NEAR(c.spacing(), kPi / 4, kTol);
  EXPECT_NEAR(c.delta(), c.spacing() / 4, kTol);
  for (std::uint32_t m : {2u, 4u, 16u, 64u, 1024u}) {
    const Constellation cm(m);
    for (std::uint32_t k = 1; k <= m; ++k) {
      const double th = cm.base_phase(k);
      EXPECT_GT(th, 0.0);
      EXPECT_LT(th, kPi);
      if (k < m) {
        EXPECT_NEAR(cm.base_phase(k + 1) - th, kPi / m, 1e-12);
      }
    }
  }
}

TEST(Constellation, RejectsBadInputs) {
  EXPECT_THROW(Constellation(3), ConfigError);
  EXPECT_THROW(Constellation(0), ConfigError);
  EXPECT_THROW(Constellation(1), ConfigError);
  const Constellation c(4);
  EXPECT_THROW(deterministic_map(c, 0), ArgumentError);
  EXPECT_THROW(deterministic_map(c, 5), ArgumentError);
  EXPECT_THROW(pattern_map(c, 0, 1), ArgumentError);
  EXPECT_THROW(pattern_map(c, 1, 5), ArgumentError);
}

TEST(PatternMap, Examples) {
  const Constellation c(4);
  for (std::uint32_t k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(pattern_map(c, 1, k), deterministic_map(c, k));
  EXPECT_NEAR(pattern_map(c, 2, 2), c.base_phase(1) + c.delta(), kTol);
  EXPECT_NEAR(pattern_map(c, 2, 1), c.base_phase(4) + c.delta(), kTol);
}

TEST(PatternMap, BijectiveForEveryPattern) {
  for (std::uint32_t m = 2; m <= 256; m <<= 1) {
    const Constellation c(m);
    for (std::uint32_t j = 1; j <= m; ++j) {
      std::set<long long> seen;
      for (std::uint32_t k = 1; k <= m; ++k) seen.insert(std::llround(pattern_map(c, j, k) / c.delta() * 2));
      ASSERT_EQ(seen.size(), m) << "M=" << m << " j=" << j;
    }
  }
}

TEST(PatternMap, ShiftConsistency) {
  for (std::uint32_t m : {2u, 4u, 8u, 32u}) {
    const Constellation c(m);
    for (std::uint32_t j = 1; j <= m; ++j) {
      for (std::uint32_t k = 1; k <= m; ++k) {
        const std::uint32_t i = (k + m - j) % m + 1;
        EXPECT_NEAR(pattern_map(c, j, k) - pattern_map(c, 1, i), (j - 1) * c.delta(), 1e-12);
      }
    }
  }
}

TEST(SignalPhase, ExamplesAndAntipodality) {
  EXPECT_NEAR(signal_phase(kPi / 8, 0), kPi / 8, kTol);
  EXPECT_NEAR(signal_phase(kPi / 8, 1), 9 * kPi / 8, kTol);
  EXPECT_NEAR(signal_phase(7 * kPi / 8, 1), 15 * kPi / 8, kTol);
  const Constellation c(16);
  for (std::uint32_t j = 1; j <= 16; ++j) {
    for (std::uint32_t k = 1; k <= 16; ++k) {
      const double b = pattern_map(c, j, k);
      EXPECT_NEAR(phase_distance(signal_phase(b, 1), signal_phase(b, 0)), kPi, 1e-12);
    }
  }
}

TEST(FineConstellation, SmallCases) {
  const auto m2 = fine_constellation(Constellation(2));
  ASSERT_EQ(m2.size(), 8u);
  for (std::size_t i = 1; i < m2.size(); ++i) EXPECT_NEAR(m2[i].phase - m2[i - 1].phase, kPi / 4, 1e-12);

  const auto m4 = fine_constellation(Constellation(4));
  ASSERT_EQ(m4.size(), 32u);
  auto ref = oracle::all_points(4, true);
  std::sort(ref.begin(), ref.end(), [](auto& a, auto& b) { return a.phase < b.phase; });
  double min_gap = 1e9;
  for (std::size_t i = 0; i < m4.size(); ++i) {
    EXPECT_NEAR(m4[i].phase, ref[i].phase, 1e-12);
    EXPECT_EQ(m4[i].j, ref[i].j);
    EXPECT_EQ(m4[i].k, ref[i].k);
    EXPECT_EQ(m4[i].bit, ref[i].bit);
    if (i) min_gap = std::min(min_gap, m4[i].phase - m4[i - 1].phase);
  }
  EXPECT_NEAR(min_gap, kPi / 16, 1e-12);

  for (std::uint32_t m : {2u, 8u, 64u}) {
    const auto pts = fine_constellation(Constellation(m));
    const double th1 = Constellation(m).base_phase(1);
    EXPECT_TRUE(std::any_of(pts.begin(), pts.end(), [&](const FinePoint& p) {
      return std::abs(p.phase - th1) < 1e-12 && p.j == 1 && p.k == 1 && p.bit == 0;
    }));
  }
}

// The bit-0 points are exactly {theta_i + (j - 1) delta}, distinct, and the
// whole fine constellation is a uniform delta grid around the circle.
TEST(FineConstellation, UniformCoverage) {
  for (std::uint32_t m = 2; m <= 64; m <<= 1) {
    const Constellation c(m);
    const auto pts = fine_constellation(c);
    ASSERT_EQ(pts.size(), c.fine_count());
    std::set<long long> bit0, expected;
    for (const auto& p : pts) {
      if (p.bit == 0) bit0.insert(std::llround(p.phase / c.delta() * 4));
    }
    for (std::uint32_t i = 1; i <= m; ++i) {
      for (std::uint32_t j = 1; j <= m; ++j) {
        expected.insert(std::llround(((2.0 * i - 1) * kPi / (2.0 * m) + (j - 1) * kPi / (double(m) * m)) / c.delta() * 4));
      }
    }
    EXPECT_EQ(bit0, expected) << "M=" << m;
    EXPECT_EQ(bit0.size(), std::size_t{m} * m);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      ASSERT_NEAR(pts[i].phase - pts[i - 1].phase, c.delta(), 1e-9) << "M=" << m << " i=" << i;
    }
    EXPECT_NEAR(pts.front().phase + kTwoPi - pts.back().phase, c.delta(), 1e-9);
  }
}

TEST(FineConstellation, IndexLabelRoundTrip) {
  for (std::uint32_t m : {2u, 4u, 16u}) {
    const Constellation c(m);
    for (std::uint64_t n = 0; n < c.fine_count(); ++n) {
      const auto l = c.fine_label(n);
      ASSERT_EQ(c.fine_index(l.j, l.k, l.bit), n);
      ASSERT_NEAR(phase_distance(c.fine_phase(n), signal_phase(pattern_map(c, l.j, l.k), l.bit)), 0.0, 1e-12);
    }
  }
}

TEST(Phase, WrapAndDistance) {
  EXPECT_DOUBLE_EQ(wrap_phase(-0.5), kTwoPi - 0.5);
  EXPECT_DOUBLE_EQ(wrap_phase(kTwoPi), 0.0);
  EXPECT_LT(wrap_phase(-1e-18), kTwoPi);
  EXPECT_NEAR(phase_distance(0.1, kTwoPi - 0.1), 0.2, 1e-12);
  EXPECT_NEAR(phase_distance(0.0, kPi), kPi, 1e-12);
}
