#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvp/rng.hpp"

namespace mvp {

/// Sorted, duplicate-free set of 1-based view indices.
using ViewSet = std::vector<int>;

/// One byte per view, nonzero = observed.
using Mask = std::vector<std::uint8_t>;
using MaskMatrix = std::vector<Mask>;

/// Validates and sorts a view set against the universe {1..n}.
ViewSet make_view_set(std::vector<int> views, int n);

/// Observed views of a 0/1 mask (mask[i] != 0 means view i+1 is present).
ViewSet observed_views(std::span<const std::uint8_t> mask);

/// Bijection of {1..n}; map()[i-1] is the image of i.
class Permutation {
 public:
  explicit Permutation(std::vector<int> map);
  static Permutation identity(int n);

  int size() const { return static_cast<int>(map_.size()); }
  int operator()(int i) const { return map_[static_cast<std::size_t>(i - 1)]; }
  const std::vector<int>& map() const { return map_; }

  Permutation inverse() const;
  bool operator==(const Permutation&) const = default;

 private:
  std::vector<int> map_;
};

/// (f o g)(i) = f(g(i)).
Permutation compose(const Permutation& f, const Permutation& g);

/// True iff `map` fixes every index outside `observed` and is a single cycle
/// on `observed`. A singleton observed set counts as cyclic (identity).
/// Throws ContractViolation if `map` is not a bijection of {1..n}.
bool is_cyclic(std::span<const int> map, const ViewSet& observed);

/// Permutation that is one cycle over `observed` and fixes all other views.
class CyclicPermutation {
 public:
  CyclicPermutation(Permutation perm, ViewSet observed);

  int size() const { return perm_.size(); }
  int operator()(int i) const { return perm_(i); }
  const std::vector<int>& map() const { return perm_.map(); }
  const Permutation& permutation() const { return perm_; }
  const ViewSet& observed() const { return observed_; }

  CyclicPermutation inverse() const;
  bool operator==(const CyclicPermutation&) const = default;

 private:
  Permutation perm_;
  ViewSet observed_;
};

inline CyclicPermutation inverse(const CyclicPermutation& p) { return p.inverse(); }

/// Sattolo's algorithm driven by explicit swap choices. For step t = 1..n-1
/// the values at positions swaps[t-1] (in {1..n-t}) and n-t+1 are exchanged,
/// starting from the identity.
CyclicPermutation sattolo_from_swaps(int n, std::span<const int> swaps);

/// Uniformly random single n-cycle ((n-1)! outcomes); identity for n = 1.
CyclicPermutation sattolo(int n, Rng& rng);

/// Sattolo over the observed views of {1..L}; missing views are fixed points.
CyclicPermutation sattolo_with_fixed_points(int L, const ViewSet& observed, Rng& rng);

/// One cyclic permutation per target view (sigma_1..sigma_L), all sharing
/// the same observed set.
class PermutationBundle {
 public:
  explicit PermutationBundle(std::vector<CyclicPermutation> columns);

  int views() const { return static_cast<int>(columns_.size()); }
  const CyclicPermutation& column(int l) const { return columns_[static_cast<std::size_t>(l - 1)]; }
  const std::vector<CyclicPermutation>& columns() const { return columns_; }
  const ViewSet& observed() const { return columns_.front().observed(); }

  std::vector<Permutation> permutations() const;
  PermutationBundle inverse() const;
  bool operator==(const PermutationBundle&) const = default;

 private:
  std::vector<CyclicPermutation> columns_;
};

PermutationBundle make_bundle(int L, const ViewSet& observed, Rng& rng);

/// Uniform (Fisher-Yates) permutation of `observed`, identity elsewhere.
/// Not necessarily cyclic; used by the random-permutation ablation.
Permutation random_permutation(int L, const ViewSet& observed, Rng& rng);

}  // namespace mvp
