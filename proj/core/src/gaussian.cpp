#include "mvp/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

// Neumaier's variant of Kahan summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Lexicographic order on (log_var[0..k), mean[0..k)).
bool canonical_less(const DiagonalGaussian& a, const DiagonalGaussian& b, Index k) {
  for (Index i = 0; i < k; ++i) {
    if (a.log_var()[i] != b.log_var()[i]) return a.log_var()[i] < b.log_var()[i];
  }
  for (Index i = 0; i < k; ++i) {
    if (a.mean()[i] != b.mean()[i]) return a.mean()[i] < b.mean()[i];
  }
  return false;
}

std::vector<std::size_t> canonical_order(std::span<const DiagonalGaussian> inputs, Index k) {
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return canonical_less(inputs[a], inputs[b], k);
  });
  return order;
}

DiagonalGaussian fuse(std::span<const DiagonalGaussian> inputs, Index k, bool normalize) {
  require(!inputs.empty(), "fusion: input list is empty");
  require(k >= 1, "fusion: k must be >= 1");
  for (const auto& g : inputs) {
    require(g.dim() >= k, "fusion: k = " + std::to_string(k) +
                              " exceeds input dimension " + std::to_string(g.dim()));
  }
  const auto order = canonical_order(inputs, k);
  Vector mean(k), log_var(k);
  for (Index j = 0; j < k; ++j) {
    CompensatedSum precision_sum, weighted_sum;
    for (std::size_t idx : order) {
      const double p = std::exp(-inputs[idx].log_var()[j]);
      precision_sum.add(p);
      weighted_sum.add(p * inputs[idx].mean()[j]);
    }
    double s = precision_sum.value();
    mean[j] = weighted_sum.value() / s;
    if (normalize) s /= static_cast<double>(inputs.size());
    log_var[j] = -std::log(s);
  }
  return DiagonalGaussian(std::move(mean), std::move(log_var));
}

}  // namespace

DiagonalGaussian::DiagonalGaussian(Vector mean, Vector log_var)
    : mean_(std::move(mean)), log_var_(std::move(log_var)) {
  require(mean_.size() >= 1, "DiagonalGaussian: dimension must be >= 1");
  require(mean_.size() == log_var_.size(), "DiagonalGaussian: mean has " +
                                               std::to_string(mean_.size()) +
                                               " entries but log_var has " +
                                               std::to_string(log_var_.size()));
  require(mean_.allFinite() && log_var_.allFinite(), "DiagonalGaussian: non-finite entry");
  log_var_ = log_var_.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

DiagonalGaussian DiagonalGaussian::standard(Index dim) {
  return DiagonalGaussian(Vector::Zero(dim), Vector::Zero(dim));
}

bool DiagonalGaussian::operator==(const DiagonalGaussian& other) const {
  return mean_.size() == other.mean_.size() && mean_ == other.mean_ &&
         log_var_ == other.log_var_;
}

Vector kl_divergence_per_dim(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  require(p.dim() == q.dim(), "kl_divergence: dimension mismatch (" + std::to_string(p.dim()) +
                                  " vs " + std::to_string(q.dim()) + ")");
  Vector out(p.dim());
  for (Index i = 0; i < p.dim(); ++i) {
    const double x = p.log_var()[i] - q.log_var()[i];
    const double diff = p.mean()[i] - q.mean()[i];
    // 0.5 * (e^x - 1 - x) is the variance mismatch part; expm1 keeps it >= 0.
    out[i] = 0.5 * (std::expm1(x) - x) + 0.5 * diff * diff * std::exp(-q.log_var()[i]);
  }
  return out;
}

double kl_divergence(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  return kl_divergence_per_dim(p, q).sum();
}

DiagonalGaussian geometric_mean_fusion(std::span<const DiagonalGaussian> inputs, Index k) {
  return fuse(inputs, k, /*normalize=*/false);
}

DiagonalGaussian geometric_average(std::span<const DiagonalGaussian> inputs) {
  require(!inputs.empty(), "geometric_average: input list is empty");
  return fuse(inputs, inputs.front().dim(), /*normalize=*/true);
}

DiagonalGaussian marginal_first_k(const DiagonalGaussian& g, Index k) {
  require(k >= 1 && k <= g.dim(), "marginal_first_k: k = " + std::to_string(k) +
                                      " outside [1, " + std::to_string(g.dim()) + "]");
  return DiagonalGaussian(g.mean().head(k), g.log_var().head(k));
}

Vector sample_reparameterized(const DiagonalGaussian& g, const Vector& eps) {
  require(eps.size() == g.dim(), "sample_reparameterized: eps has " + std::to_string(eps.size()) +
                                     " entries, distribution has " + std::to_string(g.dim()));
  return g.mean() + ((0.5 * g.log_var().array()).exp() * eps.array()).matrix();
}

void kl_divergence_backward(const DiagonalGaussian& p, const DiagonalGaussian& q, double scale,
                            GaussianGrad* grad_p, GaussianGrad* grad_q) {
  require(p.dim() == q.dim(), "kl_divergence_backward: dimension mismatch");
  for (Index i = 0; i < p.dim(); ++i) {
    const double x = p.log_var()[i] - q.log_var()[i];
    const double diff = p.mean()[i] - q.mean()[i];
    const double inv_var_q = std::exp(-q.log_var()[i]);
    const double half_em1 = 0.5 * std::expm1(x);
    if (grad_p) {
      grad_p->mean[i] += scale * diff * inv_var_q;
      grad_p->log_var[i] += scale * half_em1;
    }
    if (grad_q) {
      grad_q->mean[i] -= scale * diff * inv_var_q;
      grad_q->log_var[i] -= scale * (half_em1 + 0.5 * diff * diff * inv_var_q);
    }
  }
}

void fusion_backward(std::span<const DiagonalGaussian> inputs, const DiagonalGaussian& fused,
                     const GaussianGrad& grad_fused, std::span<GaussianGrad* const> grad_inputs) {
  require(inputs.size() == grad_inputs.size(), "fusion_backward: gradient buffer count mismatch");
  const Index k = fused.dim();
  // Weights w_i = P_i / sum_j P_j, computed from the inputs so the result does
  // not depend on whether the fused precision was normalized.
  for (Index j = 0; j < k; ++j) {
    double total = 0.0;
    for (const auto& g : inputs) total += std::exp(-g.log_var()[j]);
    const double alpha = fused.mean()[j];
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!grad_inputs[i]) continue;
      const double w = std::exp(-inputs[i].log_var()[j]) / total;
      grad_inputs[i]->mean[j] += grad_fused.mean[j] * w;
      grad_inputs[i]->log_var[j] += grad_fused.log_var[j] * w -
                                    grad_fused.mean[j] * w * (inputs[i].mean()[j] - alpha);
    }
  }
}

void sample_backward(const DiagonalGaussian& g, const Vector& eps, const Vector& grad_sample,
                     GaussianGrad& grad_g) {
  grad_g.mean += grad_sample;
  grad_g.log_var.array() +=
      grad_sample.array() * 0.5 * (0.5 * g.log_var().array()).exp() * eps.array();
}

}  // namespace mvp
