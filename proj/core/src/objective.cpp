#include "mvp/objective.hpp"

#include <cmath>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

std::string_view to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::cyclic: return "cyclic";
    case PriorMode::standard_normal: return "standard_normal";
    case PriorMode::fusion: return "fusion";
    case PriorMode::diagonal: return "diagonal";
    case PriorMode::random_perm: return "random_perm";
  }
  return "cyclic";
}

PriorMode parse_prior_mode(std::string_view name) {
  if (name == "cyclic") return PriorMode::cyclic;
  if (name == "standard_normal") return PriorMode::standard_normal;
  if (name == "fusion") return PriorMode::fusion;
  if (name == "diagonal") return PriorMode::diagonal;
  if (name == "random_perm") return PriorMode::random_perm;
  throw ContractViolation("unknown prior mode '" + std::string(name) +
                          "' (expected cyclic, standard_normal, fusion, diagonal or random_perm)");
}

void ObjectiveConfig::validate() const {
  require(std::isfinite(beta_z) && beta_z > 0.0, "beta_z must be finite and positive");
  require(std::isfinite(beta_omega) && beta_omega > 0.0, "beta_omega must be finite and positive");
}

LossBreakdown LossBreakdown::from_terms(double recon, double kl_z, double kl_omega,
                                        const ObjectiveConfig& config) {
  return {recon, kl_z, kl_omega, -recon + config.beta_z * kl_z + config.beta_omega * kl_omega};
}

double recon_log_likelihood(const Vector& x, const Vector& x_hat) {
  require(x.size() == x_hat.size(), "recon_log_likelihood: dimension mismatch (" +
                                        std::to_string(x.size()) + " vs " +
                                        std::to_string(x_hat.size()) + ")");
  return -0.5 * (x - x_hat).squaredNorm();
}

SampleNoise draw_sample_noise(int views, Index d, Index k, const ViewSet& observed, Rng& rng) {
  SampleNoise noise = zero_sample_noise(views, d, k);
  for (int v : observed) {
    for (int l = 1; l <= views; ++l) {
      auto& e = noise.z[static_cast<std::size_t>((v - 1) * views + (l - 1))];
      for (Index i = 0; i < d; ++i) e[i] = rng.normal();
    }
  }
  for (int n : observed) {
    auto& e = noise.omega[static_cast<std::size_t>(n - 1)];
    for (Index i = 0; i < k; ++i) e[i] = rng.normal();
  }
  return noise;
}

SampleNoise zero_sample_noise(int views, Index d, Index k) {
  SampleNoise noise;
  noise.views = views;
  noise.z.assign(static_cast<std::size_t>(views * views), Vector::Zero(d));
  noise.omega.assign(static_cast<std::size_t>(views), Vector::Zero(k));
  return noise;
}

namespace {

std::vector<DiagonalGaussian> row_consensus(const LatentMatrix& z, Index k) {
  std::vector<DiagonalGaussian> out;
  for (int n : z.observed()) {
    const auto cell = complete_view_cell(z, n);
    out.push_back(consensus(cell, k));
  }
  return out;
}

}  // namespace

PriorAssignment apply_prior_mode(PriorMode mode, ElboVariant variant, const LatentMatrix& z0,
                                 std::span<const Permutation> columns, Index k) {
  const int L = z0.views();
  const Index d = z0.dim();
  PriorAssignment out;
  out.views = L;
  out.z.resize(static_cast<std::size_t>(L * L));
  out.omega.resize(static_cast<std::size_t>(L));
  auto z_slot = [L](int v, int l) { return static_cast<std::size_t>((v - 1) * L + (l - 1)); };
  const auto& obs = z0.observed();

  switch (mode) {
    case PriorMode::cyclic:
    case PriorMode::random_perm: {
      require(static_cast<int>(columns.size()) == L, "apply_prior_mode: one permutation per column required");
      const LatentMatrix z1 = apply_column_permutations(z0, columns);
      for (int l = 1; l <= L; ++l) {
        const Permutation& sigma = columns[static_cast<std::size_t>(l - 1)];
        const Permutation inv = sigma.inverse();
        for (int v : obs) {
          const int src = variant == ElboVariant::basic ? sigma(v) : inv(v);
          out.z[z_slot(v, l)] = z0.at(src, l);
        }
      }
      // The omega prior comes from the other partition.
      const auto priors = row_consensus(variant == ElboVariant::basic ? z1 : z0, k);
      for (std::size_t i = 0; i < obs.size(); ++i) out.omega[static_cast<std::size_t>(obs[i] - 1)] = priors[i];
      break;
    }
    case PriorMode::standard_normal: {
      for (int v : obs) {
        for (int l = 1; l <= L; ++l) out.z[z_slot(v, l)] = DiagonalGaussian::standard(d);
      }
      for (int n : obs) out.omega[static_cast<std::size_t>(n - 1)] = DiagonalGaussian::standard(k);
      break;
    }
    case PriorMode::fusion: {
      for (int l = 1; l <= L; ++l) {
        const auto cell = single_view_cell(z0, l);
        const DiagonalGaussian prior = geometric_average(cell);
        for (int v : obs) out.z[z_slot(v, l)] = prior;
      }
      std::vector<DiagonalGaussian> omegas;
      if (variant == ElboVariant::basic) {
        omegas = row_consensus(z0, k);
      } else {
        require(static_cast<int>(columns.size()) == L, "apply_prior_mode: one permutation per column required");
        omegas = row_consensus(apply_column_permutations(z0, columns), k);
      }
      const DiagonalGaussian omega_prior = geometric_average(omegas);
      for (int n : obs) out.omega[static_cast<std::size_t>(n - 1)] = omega_prior;
      break;
    }
    case PriorMode::diagonal: {
      std::vector<DiagonalGaussian> diag;
      for (int l = 1; l <= L; ++l) {
        if (!z0.has_row(l)) continue;  // no z_l^(l) for a missing view: column left unregularized
        diag.push_back(z0.at(l, l));
        for (int v : obs) out.z[z_slot(v, l)] = z0.at(l, l);
      }
      const DiagonalGaussian omega_prior = geometric_mean_fusion(diag, k);
      for (int n : obs) out.omega[static_cast<std::size_t>(n - 1)] = omega_prior;
      break;
    }
  }
  return out;
}

LossBreakdown elbo_variant(ElboVariant variant, const ElboInputs& in, const ObjectiveConfig& config) {
  config.validate();
  const int L = in.z0.views();
  require(static_cast<int>(in.columns.size()) == L, "elbo: one permutation per column required");
  require(static_cast<int>(in.decoders.size()) == L, "elbo: one decoder per view required");
  require(static_cast<int>(in.views.size()) == L, "elbo: sample must list every view");
  require(in.k >= 1 && in.k <= in.z0.dim(), "elbo: need 1 <= k <= d");

  const LatentMatrix z1 = apply_column_permutations(in.z0, in.columns);
  const LatentMatrix& partition = variant == ElboVariant::basic ? in.z0 : z1;
  const PriorAssignment priors = apply_prior_mode(config.prior_mode, variant, in.z0, in.columns, in.k);

  double recon = 0.0;
  double kl_omega = 0.0;
  for (int n : in.z0.observed()) {
    const auto cell = complete_view_cell(partition, n);
    const DiagonalGaussian omega = consensus(cell, in.k);
    // Z1(n, n) is Z0(sigma_n(n), n); its noise travels with the source entry.
    const int source = variant == ElboVariant::basic ? n : in.columns[static_cast<std::size_t>(n - 1)](n);
    const Vector z_sample = sample_reparameterized(partition.at(n, n), in.noise.z_at(source, n));
    const Vector omega_sample = sample_reparameterized(omega, in.noise.omega_at(n));
    Vector decoder_input(in.k + in.z0.dim());
    decoder_input << omega_sample, z_sample;
    const Vector x_hat = in.decoders[static_cast<std::size_t>(n - 1)].forward_one(decoder_input);
    recon += recon_log_likelihood(in.views[static_cast<std::size_t>(n - 1)], x_hat);
    if (const auto& prior = priors.omega_prior(n)) kl_omega += kl_divergence(omega, *prior);
  }

  double kl_z = 0.0;
  for (int v : in.z0.observed()) {
    for (int l = 1; l <= L; ++l) {
      if (const auto& prior = priors.z_prior(v, l)) kl_z += kl_divergence(in.z0.at(v, l), *prior);
    }
  }
  return LossBreakdown::from_terms(recon, kl_z, kl_omega, config);
}

LossBreakdown elbo_basic(const ElboInputs& in, const ObjectiveConfig& config) {
  return elbo_variant(ElboVariant::basic, in, config);
}

LossBreakdown elbo_permuted(const ElboInputs& in, const ObjectiveConfig& config) {
  return elbo_variant(ElboVariant::permuted, in, config);
}

LossBreakdown elbo_combined(const ElboInputs& in, const ObjectiveConfig& config) {
  const LossBreakdown a = elbo_basic(in, config);
  const LossBreakdown b = elbo_permuted(in, config);
  return LossBreakdown::from_terms(0.5 * (a.recon + b.recon), 0.5 * (a.kl_z + b.kl_z),
                                   0.5 * (a.kl_omega + b.kl_omega), config);
}

}  // namespace mvp
