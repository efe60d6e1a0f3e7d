#include "mvp/permutation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

ViewSet make_view_set(std::vector<int> views, int n) {
  std::sort(views.begin(), views.end());
  require(std::adjacent_find(views.begin(), views.end()) == views.end(),
          "view set contains duplicates");
  for (int v : views) {
    require(v >= 1 && v <= n,
            "view index " + std::to_string(v) + " outside [1, " + std::to_string(n) + "]");
  }
  return views;
}

ViewSet observed_views(std::span<const std::uint8_t> mask) {
  ViewSet out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i) + 1);
  }
  return out;
}

namespace {

void check_bijection(std::span<const int> map) {
  const int n = static_cast<int>(map.size());
  require(n >= 1, "permutation must have at least one element");
  std::vector<bool> seen(map.size(), false);
  for (int x : map) {
    require(x >= 1 && x <= n, "permutation value " + std::to_string(x) + " outside [1, " +
                                  std::to_string(n) + "]");
    require(!seen[static_cast<std::size_t>(x - 1)],
            "permutation is not a bijection (value " + std::to_string(x) + " repeated)");
    seen[static_cast<std::size_t>(x - 1)] = true;
  }
}

}  // namespace

Permutation::Permutation(std::vector<int> map) : map_(std::move(map)) { check_bijection(map_); }

Permutation Permutation::identity(int n) {
  require(n >= 1, "identity permutation needs n >= 1");
  std::vector<int> map(static_cast<std::size_t>(n));
  std::iota(map.begin(), map.end(), 1);
  return Permutation(std::move(map));
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) {
    inv[static_cast<std::size_t>(map_[i] - 1)] = static_cast<int>(i) + 1;
  }
  return Permutation(std::move(inv));
}

Permutation compose(const Permutation& f, const Permutation& g) {
  require(f.size() == g.size(), "compose: size mismatch");
  std::vector<int> out(static_cast<std::size_t>(f.size()));
  for (int i = 1; i <= f.size(); ++i) out[static_cast<std::size_t>(i - 1)] = f(g(i));
  return Permutation(std::move(out));
}

bool is_cyclic(std::span<const int> map, const ViewSet& observed) {
  check_bijection(map);
  const int n = static_cast<int>(map.size());
  std::vector<bool> in_set(map.size(), false);
  for (int v : observed) {
    require(v >= 1 && v <= n, "observed view " + std::to_string(v) + " outside [1, " +
                                  std::to_string(n) + "]");
    in_set[static_cast<std::size_t>(v - 1)] = true;
  }
  for (int i = 1; i <= n; ++i) {
    if (!in_set[static_cast<std::size_t>(i - 1)] && map[static_cast<std::size_t>(i - 1)] != i) {
      return false;
    }
  }
  if (observed.empty()) return true;
  // Walk the orbit of the first observed element; it must cover the set
  // before returning.
  const int start = observed.front();
  int cur = start;
  for (std::size_t step = 1; step <= observed.size(); ++step) {
    cur = map[static_cast<std::size_t>(cur - 1)];
    if (cur == start) return step == observed.size();
  }
  return false;
}

CyclicPermutation::CyclicPermutation(Permutation perm, ViewSet observed)
    : perm_(std::move(perm)), observed_(make_view_set(std::move(observed), perm_.size())) {
  require(!observed_.empty(), "cyclic permutation needs a nonempty observed set");
  require(is_cyclic(perm_.map(), observed_),
          "permutation is not a single cycle on its observed views");
}

CyclicPermutation CyclicPermutation::inverse() const {
  return CyclicPermutation(perm_.inverse(), observed_);
}

CyclicPermutation sattolo_from_swaps(int n, std::span<const int> swaps) {
  require(n >= 1, "sattolo: n must be >= 1");
  require(static_cast<int>(swaps.size()) == n - 1,
          "sattolo: expected " + std::to_string(n - 1) + " swap choices");
  std::vector<int> a(static_cast<std::size_t>(n));
  std::iota(a.begin(), a.end(), 1);
  for (int t = 1; t <= n - 1; ++t) {
    const int k = swaps[static_cast<std::size_t>(t - 1)];
    require(k >= 1 && k <= n - t, "sattolo: swap choice " + std::to_string(k) + " at step " +
                                      std::to_string(t) + " outside [1, " +
                                      std::to_string(n - t) + "]");
    std::swap(a[static_cast<std::size_t>(k - 1)], a[static_cast<std::size_t>(n - t)]);
  }
  ViewSet all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 1);
  return CyclicPermutation(Permutation(std::move(a)), std::move(all));
}

CyclicPermutation sattolo(int n, Rng& rng) {
  require(n >= 1, "sattolo: n must be >= 1");
  std::vector<int> swaps;
  swaps.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
  for (int t = 1; t <= n - 1; ++t) {
    swaps.push_back(1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - t))));
  }
  return sattolo_from_swaps(n, swaps);
}

CyclicPermutation sattolo_with_fixed_points(int L, const ViewSet& observed, Rng& rng) {
  const ViewSet obs = make_view_set(observed, L);
  require(!obs.empty(), "sattolo_with_fixed_points: observed set is empty");
  const auto inner = sattolo(static_cast<int>(obs.size()), rng);
  std::vector<int> map(static_cast<std::size_t>(L));
  std::iota(map.begin(), map.end(), 1);
  for (std::size_t j = 0; j < obs.size(); ++j) {
    map[static_cast<std::size_t>(obs[j] - 1)] =
        obs[static_cast<std::size_t>(inner(static_cast<int>(j) + 1) - 1)];
  }
  return CyclicPermutation(Permutation(std::move(map)), obs);
}

PermutationBundle::PermutationBundle(std::vector<CyclicPermutation> columns)
    : columns_(std::move(columns)) {
  require(!columns_.empty(), "permutation bundle is empty");
  const int L = static_cast<int>(columns_.size());
  for (const auto& c : columns_) {
    require(c.size() == L, "bundle column acts on " + std::to_string(c.size()) +
                               " views, expected " + std::to_string(L));
    require(c.observed() == columns_.front().observed(),
            "bundle columns disagree on the observed view set");
  }
}

std::vector<Permutation> PermutationBundle::permutations() const {
  std::vector<Permutation> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.permutation());
  return out;
}

PermutationBundle PermutationBundle::inverse() const {
  std::vector<CyclicPermutation> inv;
  inv.reserve(columns_.size());
  for (const auto& c : columns_) inv.push_back(c.inverse());
  return PermutationBundle(std::move(inv));
}

PermutationBundle make_bundle(int L, const ViewSet& observed, Rng& rng) {
  std::vector<CyclicPermutation> cols;
  cols.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) cols.push_back(sattolo_with_fixed_points(L, observed, rng));
  return PermutationBundle(std::move(cols));
}

Permutation random_permutation(int L, const ViewSet& observed, Rng& rng) {
  const ViewSet obs = make_view_set(observed, L);
  std::vector<int> images = obs;
  for (std::size_t i = images.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(images[i - 1], images[j]);
  }
  std::vector<int> map(static_cast<std::size_t>(L));
  std::iota(map.begin(), map.end(), 1);
  for (std::size_t j = 0; j < obs.size(); ++j) map[static_cast<std::size_t>(obs[j] - 1)] = images[j];
  return Permutation(std::move(map));
}

}  // namespace mvp
