#include "mvp/latent.hpp"

#include <algorithm>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

LatentMatrix::LatentMatrix(int views, Index dim, ViewSet observed)
    : views_(views), dim_(dim), observed_(make_view_set(std::move(observed), views)) {
  require(views_ >= 1, "LatentMatrix: at least one view required");
  require(dim_ >= 1, "LatentMatrix: latent dimension must be >= 1");
  require(!observed_.empty(), "LatentMatrix: at least one observed view required");
  entries_.resize(static_cast<std::size_t>(views_ * views_));
}

bool LatentMatrix::has_row(int v) const {
  return std::binary_search(observed_.begin(), observed_.end(), v);
}

std::size_t LatentMatrix::slot(int v, int l) const {
  require(v >= 1 && v <= views_ && l >= 1 && l <= views_,
          "LatentMatrix: index (" + std::to_string(v) + ", " + std::to_string(l) +
              ") outside [1, " + std::to_string(views_) + "]");
  require(has_row(v), "LatentMatrix: row " + std::to_string(v) + " belongs to a missing view");
  return static_cast<std::size_t>((v - 1) * views_ + (l - 1));
}

const DiagonalGaussian& LatentMatrix::at(int v, int l) const {
  const auto& e = entries_[slot(v, l)];
  require(e.has_value(), "LatentMatrix: entry (" + std::to_string(v) + ", " + std::to_string(l) +
                             ") not populated");
  return *e;
}

void LatentMatrix::set(int v, int l, DiagonalGaussian g) {
  require(g.dim() == dim_, "LatentMatrix::set: dimension mismatch");
  entries_[slot(v, l)] = std::move(g);
}

bool LatentMatrix::is_set(int v, int l) const { return entries_[slot(v, l)].has_value(); }

LatentMatrix build_latent_matrix(const SampleViews& sample, std::span<const std::uint8_t> mask,
                                 const ModelParams& model) {
  const int L = model.views();
  const Index d = model.dims().d;
  require(static_cast<int>(mask.size()) == L, "build_latent_matrix: mask length " +
                                                  std::to_string(mask.size()) + " != " +
                                                  std::to_string(L) + " views");
  require(static_cast<int>(sample.size()) == L, "build_latent_matrix: sample has " +
                                                    std::to_string(sample.size()) + " views, expected " +
                                                    std::to_string(L));
  const ViewSet observed = observed_views(mask);
  require(!observed.empty(), "build_latent_matrix: all views are missing");

  LatentMatrix z(L, d, observed);
  for (int v : observed) {
    const auto& x = sample[static_cast<std::size_t>(v - 1)];
    require(x.size() == model.dims().view_dims[static_cast<std::size_t>(v - 1)],
            "build_latent_matrix: view " + std::to_string(v) + " has " + std::to_string(x.size()) +
                " features, model expects " +
                std::to_string(model.dims().view_dims[static_cast<std::size_t>(v - 1)]));
    const auto [mean, log_var] = model.encoder(v).forward(Matrix(x));
    DiagonalGaussian self(mean.col(0), log_var.col(0));
    for (int l = 1; l <= L; ++l) {
      if (l == v) continue;
      const DenseNet& f = model.correspondence(l, v);
      z.set(v, l, DiagonalGaussian(f.forward_one(self.mean()), f.forward_one(self.log_var())));
    }
    z.set(v, v, std::move(self));
  }
  return z;
}

LatentMatrix apply_column_permutations(const LatentMatrix& z0, std::span<const Permutation> columns) {
  const int L = z0.views();
  require(static_cast<int>(columns.size()) == L, "apply_column_permutations: expected " +
                                                     std::to_string(L) + " column permutations");
  LatentMatrix z1(L, z0.dim(), z0.observed());
  for (int l = 1; l <= L; ++l) {
    const auto& sigma = columns[static_cast<std::size_t>(l - 1)];
    require(sigma.size() == L, "apply_column_permutations: permutation size mismatch");
    for (int i : z0.observed()) {
      const int src = sigma(i);
      require(z0.has_row(src), "apply_column_permutations: column " + std::to_string(l) +
                                   " maps observed row " + std::to_string(i) +
                                   " to missing row " + std::to_string(src));
      z1.set(i, l, z0.at(src, l));
    }
  }
  return z1;
}

LatentMatrix apply_column_permutations(const LatentMatrix& z0, const PermutationBundle& bundle) {
  require(bundle.views() == z0.views(), "apply_column_permutations: bundle size mismatch");
  require(bundle.observed() == z0.observed(),
          "apply_column_permutations: bundle observed set differs from the matrix rows");
  const auto perms = bundle.permutations();
  return apply_column_permutations(z0, std::span<const Permutation>(perms));
}

std::vector<DiagonalGaussian> single_view_cell(const LatentMatrix& z, int l) {
  require(l >= 1 && l <= z.views(), "single_view_cell: column " + std::to_string(l) +
                                        " outside [1, " + std::to_string(z.views()) + "]");
  std::vector<DiagonalGaussian> out;
  out.reserve(z.observed().size());
  for (int v : z.observed()) out.push_back(z.at(v, l));
  return out;
}

std::vector<DiagonalGaussian> complete_view_cell(const LatentMatrix& z, int n) {
  require(n >= 1 && n <= z.views() && z.has_row(n),
          "complete_view_cell: row " + std::to_string(n) + " is not an observed view");
  std::vector<DiagonalGaussian> out;
  out.reserve(static_cast<std::size_t>(z.views()));
  for (int l = 1; l <= z.views(); ++l) out.push_back(z.at(n, l));
  return out;
}

DiagonalGaussian consensus(std::span<const DiagonalGaussian> cell, Index k) {
  return geometric_mean_fusion(cell, k);
}

std::map<int, DiagonalGaussian> diagonal(const LatentMatrix& z) {
  std::map<int, DiagonalGaussian> out;
  for (int n : z.observed()) out.emplace(n, z.at(n, n));
  return out;
}

}  // namespace mvp
