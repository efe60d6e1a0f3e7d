#pragma once

#include <array>
#include <cstdint>

namespace mvp {

/// xoshiro256** seeded through SplitMix64.
///
/// The generator is fully specified (no std:: distributions) so that masks,
/// fingerprints and synthetic data are reproducible across platforms and
/// across implementations in other languages.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();

  /// Uniform integer in [0, n). n must be > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// Derives an independent stream (e.g. one per k-means restart).
  Rng split();

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace mvp
