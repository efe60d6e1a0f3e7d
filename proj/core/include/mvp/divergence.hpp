#pragma once

#include <span>
#include <vector>

#include "mvp/gaussian.hpp"
#include "mvp/permutation.hpp"

namespace mvp {

struct DivergenceTerm {
  int from = 0;  // i (1-based)
  int to = 0;    // sigma(i)
  double kl = 0.0;
};

struct DivergenceReport {
  double total = 0.0;
  std::vector<DivergenceTerm> per_term;
};

/// sum_i KL[P_i || P_sigma(i)].
///
/// `sigma` may be any bijection of {1..N}; for the dissimilarity-coefficient
/// guarantees it should be cyclic on {1..N}.
DivergenceReport permutation_divergence(std::span<const DiagonalGaussian> ps, const Permutation& sigma);
DivergenceReport permutation_divergence(std::span<const DiagonalGaussian> ps, const CyclicPermutation& sigma);

/// d(.; sigma) + d(.; sigma^-1) = sum_i (KL[P_i || P_sigma(i)] + KL[P_sigma(i) || P_i]).
/// per_term holds the sigma terms followed by the sigma^-1 terms.
DivergenceReport symmetric_permutation_divergence(std::span<const DiagonalGaussian> ps,
                                                  const Permutation& sigma);
DivergenceReport symmetric_permutation_divergence(std::span<const DiagonalGaussian> ps,
                                                  const CyclicPermutation& sigma);

}  // namespace mvp
