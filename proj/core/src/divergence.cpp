#include "mvp/divergence.hpp"

#include <string>

#include "mvp/errors.hpp"

namespace mvp {

DivergenceReport permutation_divergence(std::span<const DiagonalGaussian> ps, const Permutation& sigma) {
  require(!ps.empty(), "permutation_divergence: empty distribution list");
  require(sigma.size() == static_cast<int>(ps.size()),
          "permutation_divergence: permutation acts on " + std::to_string(sigma.size()) +
              " indices but " + std::to_string(ps.size()) + " distributions were given");
  DivergenceReport report;
  report.per_term.reserve(ps.size());
  for (int i = 1; i <= sigma.size(); ++i) {
    const int j = sigma(i);
    const double kl = kl_divergence(ps[static_cast<std::size_t>(i - 1)], ps[static_cast<std::size_t>(j - 1)]);
    report.per_term.push_back({i, j, kl});
    report.total += kl;
  }
  return report;
}

DivergenceReport permutation_divergence(std::span<const DiagonalGaussian> ps, const CyclicPermutation& sigma) {
  return permutation_divergence(ps, sigma.permutation());
}

DivergenceReport symmetric_permutation_divergence(std::span<const DiagonalGaussian> ps,
                                                  const Permutation& sigma) {
  DivergenceReport forward = permutation_divergence(ps, sigma);
  const DivergenceReport backward = permutation_divergence(ps, sigma.inverse());
  forward.total += backward.total;
  forward.per_term.insert(forward.per_term.end(), backward.per_term.begin(), backward.per_term.end());
  return forward;
}

DivergenceReport symmetric_permutation_divergence(std::span<const DiagonalGaussian> ps,
                                                  const CyclicPermutation& sigma) {
  return symmetric_permutation_divergence(ps, sigma.permutation());
}

}  // namespace mvp
