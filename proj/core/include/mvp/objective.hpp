#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mvp/gaussian.hpp"
#include "mvp/latent.hpp"
#include "mvp/neural.hpp"
#include "mvp/permutation.hpp"
#include "mvp/rng.hpp"

namespace mvp {

/// Source of the priors on z and omega.
///   cyclic          - permuted posteriors (sigma for the basic bound, sigma^-1 for the permuted one)
///   standard_normal - N(0, I) everywhere
///   fusion          - geometric average of each single-view cell / of all omegas
///   diagonal        - z_l^(l) for column l, fused diagonal for omega
///   random_perm     - like cyclic but with uniformly random (possibly non-cyclic) permutations
enum class PriorMode { cyclic, standard_normal, fusion, diagonal, random_perm };

std::string_view to_string(PriorMode mode);
PriorMode parse_prior_mode(std::string_view name);

enum class ReconMode { gaussian_unit_variance };

/// Which complete-view partition feeds the reconstruction and posteriors.
enum class ElboVariant { basic, permuted };

struct ObjectiveConfig {
  double beta_z = 5.0;
  double beta_omega = 2.5;
  PriorMode prior_mode = PriorMode::cyclic;
  ReconMode recon_mode = ReconMode::gaussian_unit_variance;

  void validate() const;
};

/// Minimization form: total = -recon + beta_z * kl_z + beta_omega * kl_omega,
/// where recon is a log-likelihood (<= 0 up to a constant).
struct LossBreakdown {
  double recon = 0.0;
  double kl_z = 0.0;
  double kl_omega = 0.0;
  double total = 0.0;

  static LossBreakdown from_terms(double recon, double kl_z, double kl_omega,
                                  const ObjectiveConfig& config);
};

/// Unit-variance Gaussian log-likelihood without the constant: -0.5 ||x - x_hat||^2.
double recon_log_likelihood(const Vector& x, const Vector& x_hat);

/// Reparameterization noise for one sample: one d-vector per latent entry
/// (v, l) and one k-vector per consensus row n. The same noise is shared by
/// the basic and permuted bounds.
struct SampleNoise {
  int views = 0;
  std::vector<Vector> z;      // (v-1)*L + (l-1)
  std::vector<Vector> omega;  // n-1

  const Vector& z_at(int v, int l) const { return z[static_cast<std::size_t>((v - 1) * views + (l - 1))]; }
  const Vector& omega_at(int n) const { return omega[static_cast<std::size_t>(n - 1)]; }
};

/// Draws noise for observed rows in ascending (v, l) order, then omega rows.
SampleNoise draw_sample_noise(int views, Index d, Index k, const ViewSet& observed, Rng& rng);
SampleNoise zero_sample_noise(int views, Index d, Index k);

struct PriorAssignment {
  int views = 0;
  std::vector<std::optional<DiagonalGaussian>> z;      // prior of z0(v, l); nullopt = no term
  std::vector<std::optional<DiagonalGaussian>> omega;  // prior of the variant's omega_n

  const std::optional<DiagonalGaussian>& z_prior(int v, int l) const {
    return z[static_cast<std::size_t>((v - 1) * views + (l - 1))];
  }
  const std::optional<DiagonalGaussian>& omega_prior(int n) const {
    return omega[static_cast<std::size_t>(n - 1)];
  }
};

/// Priors for every posterior term of one bound. For cyclic and random_perm
/// `columns` are the column permutations; the other modes ignore them.
PriorAssignment apply_prior_mode(PriorMode mode, ElboVariant variant, const LatentMatrix& z0,
                                 std::span<const Permutation> columns, Index k);

/// Everything a per-sample bound needs besides the configuration.
struct ElboInputs {
  const SampleViews& views;
  const LatentMatrix& z0;
  std::span<const Permutation> columns;
  std::span<const DenseNet> decoders;
  Index k;
  const SampleNoise& noise;
};

/// Self-view reconstruction from the Z0 diagonal; priors from sigma.
LossBreakdown elbo_basic(const ElboInputs& in, const ObjectiveConfig& config);
/// Cross-view generation from the Z1 diagonal; priors from sigma^-1.
LossBreakdown elbo_permuted(const ElboInputs& in, const ObjectiveConfig& config);
/// Field-wise mean of the two bounds.
LossBreakdown elbo_combined(const ElboInputs& in, const ObjectiveConfig& config);

LossBreakdown elbo_variant(ElboVariant variant, const ElboInputs& in, const ObjectiveConfig& config);

}  // namespace mvp
