#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mvp/gaussian.hpp"
#include "mvp/model.hpp"
#include "mvp/permutation.hpp"

namespace mvp {

/// Per-view feature vectors of one sample; entries for missing views are
/// never read and may be empty.
using SampleViews = std::vector<Vector>;

/// L x L grid of latent Gaussians. Entry (v, l) is z_v^(l): the view-l latent
/// obtained from source view v. Rows exist only for observed source views.
/// All indices are 1-based.
class LatentMatrix {
 public:
  LatentMatrix(int views, Index dim, ViewSet observed);

  int views() const { return views_; }
  Index dim() const { return dim_; }
  const ViewSet& observed() const { return observed_; }
  bool has_row(int v) const;

  const DiagonalGaussian& at(int v, int l) const;
  void set(int v, int l, DiagonalGaussian g);
  bool is_set(int v, int l) const;

  bool operator==(const LatentMatrix&) const = default;

 private:
  std::size_t slot(int v, int l) const;

  int views_;
  Index dim_;
  ViewSet observed_;
  std::vector<std::optional<DiagonalGaussian>> entries_;
};

/// Z0: diagonal entries from the encoders, off-diagonal entry (v, l) from the
/// correspondence f_{l<-v} applied to the mean and (separately) the
/// log-variance of the diagonal entry (v, v).
LatentMatrix build_latent_matrix(const SampleViews& sample, std::span<const std::uint8_t> mask,
                                 const ModelParams& model);

/// Z1[i][l] = Z0[sigma_l(i)][l] for every observed row i.
LatentMatrix apply_column_permutations(const LatentMatrix& z0, const PermutationBundle& bundle);
LatentMatrix apply_column_permutations(const LatentMatrix& z0, std::span<const Permutation> columns);

/// Column l restricted to observed rows (ascending row order).
std::vector<DiagonalGaussian> single_view_cell(const LatentMatrix& z, int l);

/// Row n: one latent per target view l = 1..L.
std::vector<DiagonalGaussian> complete_view_cell(const LatentMatrix& z, int n);

/// Consensus variable: fusion of the first-k marginals of a complete-view cell.
DiagonalGaussian consensus(std::span<const DiagonalGaussian> cell, Index k);

/// Entry (n, n) for every observed n.
std::map<int, DiagonalGaussian> diagonal(const LatentMatrix& z);

}  // namespace mvp
