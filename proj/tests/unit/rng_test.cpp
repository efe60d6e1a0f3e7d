#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mvp/rng.hpp"

namespace {

// Straight transcription of the public-domain reference generators.
struct ReferenceXoshiro {
  std::array<std::uint64_t, 4> s;

  explicit ReferenceXoshiro(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s) {
      std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

TEST(SplitMix64, FirstOutputFromZeroSeed) {
  std::uint64_t state = 0;
  EXPECT_EQ(mvp::splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(state, 0x9e3779b97f4a7c15ULL);
}

TEST(Rng, MatchesReferenceStream) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    mvp::Rng rng(seed);
    ReferenceXoshiro ref(seed);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(rng.next_u64(), ref.next()) << "seed " << seed << " draw " << i;
  }
}

TEST(Rng, SameSeedSameStream) {
  mvp::Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIndexStaysInRangeAndCoversIt) {
  mvp::Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto r = rng.uniform_index(7);
    ASSERT_LT(r, 7u);
    ++counts[r];
  }
  // Binomial(70000, 1/7): sd ~ 92.6, allow 5 sd.
  for (int c : counts) EXPECT_NEAR(c, 10000, 463);
  EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
  EXPECT_EQ(rng.uniform_index(1), 0u);
}

TEST(Rng, UniformIsInHalfOpenUnitInterval) {
  mvp::Rng rng(11);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, NormalHasUnitMoments) {
  mvp::Rng rng(5);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, SplitStreamsAreReproducibleAndDistinct) {
  mvp::Rng a(9), b(9);
  mvp::Rng a1 = a.split();
  mvp::Rng b1 = b.split();
  mvp::Rng a2 = a.split();
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a1.next_u64(), b1.next_u64());
  int equal = 0;
  for (int i = 0; i < 50; ++i) equal += a1.next_u64() == a2.next_u64();
  EXPECT_EQ(equal, 0);
}

}  // namespace
