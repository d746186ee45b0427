// Seeded randomness: engine bit-stability, seed derivation, value mappings,
// and the Fisher-Yates shuffle.

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "meshlearn/rng.hpp"

using namespace meshlearn;

// The standard pins the 10000th output of a default-constructed mt19937_64
// (seed 5489); hitting it proves the engine is the bit-stable one.
TEST(Rng, EngineMatchesStandardReferenceValue) {
  RngStream rng(5489);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = rng.next_u64();
  EXPECT_EQ(last, 9981545732273789042ULL);
}

TEST(Rng, SameSeedSameSequence) {
  RngStream a(12345), b(12345);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DifferentSeedsDiverge) {
  RngStream a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  EXPECT_LT(equal, 2);
}

TEST(Rng, DeriveSeedSeparatesEveryArgument) {
  const std::uint64_t base = 42;
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 8; ++a)
    for (std::uint64_t b = 0; b < 8; ++b)
      for (std::uint64_t c = 0; c < 8; ++c)
        seen.insert(derive_seed(base, a, b, c));
  EXPECT_EQ(seen.size(), 8u * 8u * 8u);  // no collisions across the grid
  // Deterministic: the same inputs always give the same seed.
  EXPECT_EQ(derive_seed(base, 1, 2, 3), derive_seed(base, 1, 2, 3));
  // Argument order matters.
  EXPECT_NE(derive_seed(base, 1, 2, 3), derive_seed(base, 3, 2, 1));
  // The base seed matters.
  EXPECT_NE(derive_seed(1, 7), derive_seed(2, 7));
}

TEST(Rng, UnitValuesStayInHalfOpenInterval) {
  RngStream rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, UniformRespectsBoundsAndCoversRange) {
  RngStream rng(7);
  double lo_seen = 1e9, hi_seen = -1e9;
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-3.0, 5.0);
    EXPECT_GE(v, -3.0);
    EXPECT_LT(v, 5.0);
    lo_seen = std::min(lo_seen, v);
    hi_seen = std::max(hi_seen, v);
  }
  EXPECT_LT(lo_seen, -2.5);
  EXPECT_GT(hi_seen, 4.5);
}

TEST(Rng, BelowIsBoundedAndHitsEveryResidue) {
  RngStream rng(11);
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < 4000; ++i) {
    const std::uint64_t v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (std::uint64_t v = 0; v < 7; ++v) {
    // Each residue should appear near 4000/7 ~ 571 times.
    EXPECT_GT(counts[v], 400) << "residue " << v;
    EXPECT_LT(counts[v], 750) << "residue " << v;
  }
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(Rng, NormalHasUnitMoments) {
  RngStream rng(3);
  const int n = 50000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  const std::vector<int> original = v;
  RngStream rng(21);
  rng.shuffle(v);
  EXPECT_NE(v, original);  // 50! makes staying put essentially impossible
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, original);
}

TEST(Rng, ShuffleIsSeedDeterministic) {
  std::vector<int> a(20), b(20), c(20);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  c = a;
  RngStream r1(5), r2(5), r3(6);
  r1.shuffle(a);
  r2.shuffle(b);
  r3.shuffle(c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}
