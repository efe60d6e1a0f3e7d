#pragma once

#include <span>

#include <Eigen/Core>

namespace mvp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 30.0;

/// Gaussian with diagonal covariance, parameterized by mean and log-variance.
///
/// log_var is clamped to [kLogVarMin, kLogVarMax] on construction so that
/// exp() never overflows. Construction rejects empty or mismatched vectors and
/// non-finite entries.
class DiagonalGaussian {
 public:
  DiagonalGaussian(Vector mean, Vector log_var);

  static DiagonalGaussian standard(Index dim);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& log_var() const { return log_var_; }
  Vector variance() const { return log_var_.array().exp().matrix(); }
  Vector precision() const { return (-log_var_.array()).exp().matrix(); }

  bool operator==(const DiagonalGaussian& other) const;

 private:
  Vector mean_;
  Vector log_var_;
};

/// KL[p || q] in closed form, summed over dimensions.
double kl_divergence(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// Per-dimension KL terms; their sum is kl_divergence(p, q).
Vector kl_divergence_per_dim(const DiagonalGaussian& p, const DiagonalGaussian& q);

/// Precision-weighted product of the first-k marginals of `inputs`.
///
/// Fused precision is the sum of input precisions and the fused mean is the
/// precision-weighted average of input means. Inputs are accumulated in a
/// canonical value order with compensated summation, so any reordering of
/// `inputs` yields a bitwise-identical result.
DiagonalGaussian geometric_mean_fusion(std::span<const DiagonalGaussian> inputs, Index k);

/// Normalized geometric average: same mean as geometric_mean_fusion over all
/// dimensions, but precision is the *average* of input precisions, so
/// averaging m copies of a distribution returns that distribution.
DiagonalGaussian geometric_average(std::span<const DiagonalGaussian> inputs);

DiagonalGaussian marginal_first_k(const DiagonalGaussian& g, Index k);

/// mean + exp(log_var / 2) * eps
Vector sample_reparameterized(const DiagonalGaussian& g, const Vector& eps);

// ---------------------------------------------------------------------------
// Reverse-mode pieces used by the training engine. Each *_backward adds into
// the supplied gradient buffers.

struct GaussianGrad {
  Vector mean;
  Vector log_var;

  GaussianGrad() = default;
  explicit GaussianGrad(Index dim) : mean(Vector::Zero(dim)), log_var(Vector::Zero(dim)) {}
  void set_zero() {
    mean.setZero();
    log_var.setZero();
  }
};

/// Adds scale * d KL[p||q] / d(p, q). Either gradient pointer may be null.
void kl_divergence_backward(const DiagonalGaussian& p, const DiagonalGaussian& q, double scale,
                            GaussianGrad* grad_p, GaussianGrad* grad_q);

/// Backward for both geometric_mean_fusion and geometric_average (they share
/// the same Jacobian w.r.t. mean and log-variance). Only the first
/// fused.dim() entries of each input gradient are touched. Gradients through
/// the log-variance clamp are ignored.
void fusion_backward(std::span<const DiagonalGaussian> inputs, const DiagonalGaussian& fused,
                     const GaussianGrad& grad_fused, std::span<GaussianGrad* const> grad_inputs);

/// Adds the gradient of sample_reparameterized(g, eps) given upstream grad_sample.
void sample_backward(const DiagonalGaussian& g, const Vector& eps, const Vector& grad_sample,
                     GaussianGrad& grad_g);

}  // namespace mvp
