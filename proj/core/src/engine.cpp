#include "mvp/engine.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <tuple>

#include "mvp/errors.hpp"

namespace mvp {
namespace {

// Gaussian nodes of one sample's latent stage. Leaves are Z0 entries or
// constants; fused nodes remember their children for the backward sweep.
class SampleGraph {
 public:
  int add_leaf(DiagonalGaussian g, bool constant = false) {
    const Index dim = g.dim();
    nodes_.push_back(Node{std::move(g), GaussianGrad(dim), {}, 0, false, constant});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int add_fusion(std::vector<int> children, Index k, bool normalize) {
    std::vector<DiagonalGaussian> inputs;
    inputs.reserve(children.size());
    for (int c : children) inputs.push_back(nodes_[static_cast<std::size_t>(c)].value);
    // Inputs are finite and consistent here, so a failure means the fused
    // moments overflowed.
    std::optional<DiagonalGaussian> fused;
    try {
      fused.emplace(normalize ? geometric_average(inputs) : geometric_mean_fusion(inputs, k));
    } catch (const ContractViolation& e) {
      throw NumericalError(std::string("non-finite consensus fusion (") + e.what() + ")");
    }
    const Index dim = fused->dim();
    nodes_.push_back(Node{std::move(*fused), GaussianGrad(dim), std::move(children), k, true, false});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const DiagonalGaussian& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  GaussianGrad* grad(int id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    return n.constant ? nullptr : &n.grad;
  }

  void backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->fused) continue;
      std::vector<DiagonalGaussian> inputs;
      std::vector<GaussianGrad*> grads;
      for (int c : it->children) {
        inputs.push_back(value(c));
        grads.push_back(grad(c));
      }
      fusion_backward(inputs, it->value, it->grad, grads);
    }
  }

 private:
  struct Node {
    DiagonalGaussian value;
    GaussianGrad grad;
    std::vector<int> children;
    Index k;
    bool fused;
    bool constant;
  };
  std::vector<Node> nodes_;
};

struct KlTerm {
  int p;
  int q;
  double weight;
  bool is_z;
};

struct DecoderColumn {
  int sample;
  int omega_node;
  int z_node;
  const Vector* eps_omega;
  const Vector* eps_z;
  double weight;
};

struct SampleState {
  SampleGraph graph;
  std::vector<int> entry;  // (v-1)*L + (l-1) -> node id, -1 for missing rows
  std::vector<KlTerm> kl;
};

struct ViewForward {
  std::vector<int> members;  // batch positions observing this view
  EncoderCache encoder_cache;
  Matrix mean;
  Matrix log_var_raw;
  std::vector<DenseCache> corr_cache;  // by target view
  std::vector<Matrix> corr_out;        // d x 2n: [mean | raw log_var]
};

template <typename Derived>
Matrix clamp_log_var(const Eigen::MatrixBase<Derived>& raw) {
  return raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

// Zeroes gradient entries whose forward value was clamped.
void mask_clamped(const auto& raw, auto&& grad) {
  for (Index j = 0; j < grad.cols(); ++j) {
    for (Index i = 0; i < grad.rows(); ++i) {
      const double r = raw(i, j);
      if (r < kLogVarMin || r > kLogVarMax) grad(i, j) = 0.0;
    }
  }
}

void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError("non-finite values in " + what);
}

}  // namespace

LossBreakdown evaluate_batch(ModelParams& model, std::span<const BatchItem> batch, ObjectiveKind kind,
                             const ObjectiveConfig& config, bool compute_grad) {
  config.validate();
  require(!batch.empty(), "evaluate_batch: empty batch");
  const int L = model.views();
  const Index d = model.dims().d;
  const Index k = model.dims().k;
  const int B = static_cast<int>(batch.size());
  const auto slot = [L](int v, int l) { return static_cast<std::size_t>((v - 1) * L + (l - 1)); };

  for (int b = 0; b < B; ++b) {
    const auto& item = batch[static_cast<std::size_t>(b)];
    require(item.views && item.noise, "evaluate_batch: batch item without views or noise");
    require(static_cast<int>(item.mask.size()) == L && static_cast<int>(item.views->size()) == L &&
                static_cast<int>(item.columns.size()) == L,
            "evaluate_batch: sample " + std::to_string(b) + " does not match the model's " +
                std::to_string(L) + " views");
  }

  // Encoders and correspondences, batched per source view.
  std::vector<ViewForward> fwd(static_cast<std::size_t>(L));
  std::vector<std::vector<int>> position(static_cast<std::size_t>(L), std::vector<int>(B, -1));
  for (int v = 1; v <= L; ++v) {
    auto& f = fwd[static_cast<std::size_t>(v - 1)];
    for (int b = 0; b < B; ++b) {
      if (batch[static_cast<std::size_t>(b)].mask[static_cast<std::size_t>(v - 1)]) {
        position[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(b)] =
            static_cast<int>(f.members.size());
        f.members.push_back(b);
      }
    }
    const Index n = static_cast<Index>(f.members.size());
    if (n == 0) continue;
    const Index dv = model.dims().view_dims[static_cast<std::size_t>(v - 1)];
    Matrix x(dv, n);
    for (Index j = 0; j < n; ++j) {
      const Vector& col = (*batch[static_cast<std::size_t>(f.members[static_cast<std::size_t>(j)])].views)
          [static_cast<std::size_t>(v - 1)];
      require(col.size() == dv, "evaluate_batch: view " + std::to_string(v) + " has " +
                                    std::to_string(col.size()) + " features, model expects " +
                                    std::to_string(dv));
      x.col(j) = col;
    }
    std::tie(f.mean, f.log_var_raw) = model.encoder(v).forward(x, compute_grad ? &f.encoder_cache : nullptr);
    check_finite(f.mean, "encoder " + std::to_string(v) + " mean");
    check_finite(f.log_var_raw, "encoder " + std::to_string(v) + " log-variance");

    Matrix corr_in(d, 2 * n);
    corr_in.leftCols(n) = f.mean;
    corr_in.rightCols(n) = clamp_log_var(f.log_var_raw);
    f.corr_cache.resize(static_cast<std::size_t>(L));
    f.corr_out.resize(static_cast<std::size_t>(L));
    for (int l = 1; l <= L; ++l) {
      if (l == v) continue;
      auto& out = f.corr_out[static_cast<std::size_t>(l - 1)];
      out = model.correspondence(l, v).forward(
          corr_in, compute_grad ? &f.corr_cache[static_cast<std::size_t>(l - 1)] : nullptr);
      check_finite(out, "correspondence " + std::to_string(v) + "->" + std::to_string(l));
    }
  }

  // Per-sample latent stage: Z0 leaves, fused consensus nodes and KL terms.
  const double base_weight = 1.0 / B;
  std::vector<ElboVariant> variants{ElboVariant::basic};
  if (kind == ObjectiveKind::combined) variants.push_back(ElboVariant::permuted);
  const double variant_weight = base_weight / static_cast<double>(variants.size());

  std::vector<SampleState> states(static_cast<std::size_t>(B));
  std::vector<std::vector<DecoderColumn>> dec_cols(static_cast<std::size_t>(L));
  for (int b = 0; b < B; ++b) {
    const auto& item = batch[static_cast<std::size_t>(b)];
    auto& st = states[static_cast<std::size_t>(b)];
    auto& g = st.graph;
    st.entry.assign(static_cast<std::size_t>(L * L), -1);
    const ViewSet obs = observed_views(item.mask);
    for (int v : obs) {
      const auto& f = fwd[static_cast<std::size_t>(v - 1)];
      const Index p = position[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(b)];
      for (int l = 1; l <= L; ++l) {
        if (l == v) {
          st.entry[slot(v, l)] = g.add_leaf(DiagonalGaussian(f.mean.col(p), clamp_log_var(f.log_var_raw.col(p))));
        } else {
          const Matrix& out = f.corr_out[static_cast<std::size_t>(l - 1)];
          const Index n = static_cast<Index>(f.members.size());
          st.entry[slot(v, l)] = g.add_leaf(DiagonalGaussian(out.col(p), clamp_log_var(out.col(n + p))));
        }
      }
    }
    const auto entry = [&](int v, int l) { return st.entry[slot(v, l)]; };
    const auto& sigma = item.columns;

    for (ElboVariant variant : variants) {
      const bool basic = variant == ElboVariant::basic;
      const double w = variant_weight;
      // Row n of the variant's partition draws column l from row src(n, l) of Z0.
      const auto src = [&](int n, int l) { return basic ? n : sigma[static_cast<std::size_t>(l - 1)](n); };
      const auto other_src = [&](int n, int l) { return basic ? sigma[static_cast<std::size_t>(l - 1)](n) : n; };

      std::vector<int> omega(static_cast<std::size_t>(L), -1);
      for (int n : obs) {
        std::vector<int> row;
        for (int l = 1; l <= L; ++l) row.push_back(entry(src(n, l), l));
        omega[static_cast<std::size_t>(n - 1)] = g.add_fusion(std::move(row), k, false);
        const int zs = src(n, n);
        dec_cols[static_cast<std::size_t>(n - 1)].push_back(
            DecoderColumn{b, omega[static_cast<std::size_t>(n - 1)], entry(zs, n),
                          &item.noise->omega_at(n), &item.noise->z_at(zs, n), w});
      }

      switch (config.prior_mode) {
        case PriorMode::cyclic:
        case PriorMode::random_perm: {
          for (int l = 1; l <= L; ++l) {
            const Permutation& s = sigma[static_cast<std::size_t>(l - 1)];
            const Permutation inv = s.inverse();
            for (int v : obs) st.kl.push_back({entry(v, l), entry(basic ? s(v) : inv(v), l), w, true});
          }
          for (int n : obs) {
            std::vector<int> row;
            for (int l = 1; l <= L; ++l) row.push_back(entry(other_src(n, l), l));
            const int prior = g.add_fusion(std::move(row), k, false);
            st.kl.push_back({omega[static_cast<std::size_t>(n - 1)], prior, w, false});
          }
          break;
        }
        case PriorMode::standard_normal: {
          const int zp = g.add_leaf(DiagonalGaussian::standard(d), true);
          const int op = g.add_leaf(DiagonalGaussian::standard(k), true);
          for (int v : obs) {
            for (int l = 1; l <= L; ++l) st.kl.push_back({entry(v, l), zp, w, true});
          }
          for (int n : obs) st.kl.push_back({omega[static_cast<std::size_t>(n - 1)], op, w, false});
          break;
        }
        case PriorMode::fusion: {
          for (int l = 1; l <= L; ++l) {
            std::vector<int> column;
            for (int v : obs) column.push_back(entry(v, l));
            const int prior = g.add_fusion(std::move(column), d, true);
            for (int v : obs) st.kl.push_back({entry(v, l), prior, w, true});
          }
          std::vector<int> omegas;
          for (int n : obs) omegas.push_back(omega[static_cast<std::size_t>(n - 1)]);
          const int prior = g.add_fusion(omegas, k, true);
          for (int id : omegas) st.kl.push_back({id, prior, w, false});
          break;
        }
        case PriorMode::diagonal: {
          std::vector<int> diag;
          for (int l : obs) {
            diag.push_back(entry(l, l));
            for (int v : obs) st.kl.push_back({entry(v, l), entry(l, l), w, true});
          }
          const int prior = g.add_fusion(std::move(diag), k, false);
          for (int n : obs) st.kl.push_back({omega[static_cast<std::size_t>(n - 1)], prior, w, false});
          break;
        }
      }
    }
  }

  double kl_z = 0.0;
  double kl_omega = 0.0;
  for (auto& st : states) {
    for (const auto& t : st.kl) {
      const double value = t.weight * kl_divergence(st.graph.value(t.p), st.graph.value(t.q));
      (t.is_z ? kl_z : kl_omega) += value;
    }
  }
  if (!std::isfinite(kl_z)) throw NumericalError("non-finite kl_z term");
  if (!std::isfinite(kl_omega)) throw NumericalError("non-finite kl_omega term");

  // Decoders, batched per target view.
  double recon = 0.0;
  for (int l = 1; l <= L; ++l) {
    const auto& cols = dec_cols[static_cast<std::size_t>(l - 1)];
    if (cols.empty()) continue;
    const Index n = static_cast<Index>(cols.size());
    const Index dl = model.dims().view_dims[static_cast<std::size_t>(l - 1)];
    Matrix input(k + d, n);
    Matrix target(dl, n);
    for (Index j = 0; j < n; ++j) {
      const auto& c = cols[static_cast<std::size_t>(j)];
      auto& g = states[static_cast<std::size_t>(c.sample)].graph;
      input.col(j).head(k) = sample_reparameterized(g.value(c.omega_node), *c.eps_omega);
      input.col(j).tail(d) = sample_reparameterized(g.value(c.z_node), *c.eps_z);
      target.col(j) = (*batch[static_cast<std::size_t>(c.sample)].views)[static_cast<std::size_t>(l - 1)];
    }
    DenseCache cache;
    DenseNet& decoder = model.decoder(l);
    const Matrix x_hat = decoder.forward(input, compute_grad ? &cache : nullptr);
    check_finite(x_hat, "decoder " + std::to_string(l) + " output");
    const Matrix diff = x_hat - target;
    for (Index j = 0; j < n; ++j) recon -= cols[static_cast<std::size_t>(j)].weight * 0.5 * diff.col(j).squaredNorm();
    if (!compute_grad) continue;

    Matrix grad_out(dl, n);
    for (Index j = 0; j < n; ++j) grad_out.col(j) = cols[static_cast<std::size_t>(j)].weight * diff.col(j);
    const Matrix grad_in = decoder.backward(cache, grad_out, true);
    for (Index j = 0; j < n; ++j) {
      const auto& c = cols[static_cast<std::size_t>(j)];
      auto& g = states[static_cast<std::size_t>(c.sample)].graph;
      sample_backward(g.value(c.omega_node), *c.eps_omega, grad_in.col(j).head(k), *g.grad(c.omega_node));
      sample_backward(g.value(c.z_node), *c.eps_z, grad_in.col(j).tail(d), *g.grad(c.z_node));
    }
  }
  if (!std::isfinite(recon)) throw NumericalError("non-finite reconstruction term");

  const LossBreakdown loss = LossBreakdown::from_terms(recon, kl_z, kl_omega, config);
  if (!compute_grad) return loss;

  // Latent stage backward.
  for (auto& st : states) {
    auto& g = st.graph;
    for (const auto& t : st.kl) {
      const double beta = t.is_z ? config.beta_z : config.beta_omega;
      kl_divergence_backward(g.value(t.p), g.value(t.q), beta * t.weight, g.grad(t.p), g.grad(t.q));
    }
    g.backward();
  }

  // Correspondences and encoders.
  for (int v = 1; v <= L; ++v) {
    auto& f = fwd[static_cast<std::size_t>(v - 1)];
    const Index n = static_cast<Index>(f.members.size());
    if (n == 0) continue;
    Matrix grad_mean = Matrix::Zero(d, n);
    Matrix grad_log_var = Matrix::Zero(d, n);
    for (int l = 1; l <= L; ++l) {
      Matrix grad_out(d, 2 * n);
      for (Index j = 0; j < n; ++j) {
        auto& st = states[static_cast<std::size_t>(f.members[static_cast<std::size_t>(j)])];
        const GaussianGrad& gz = *st.graph.grad(st.entry[slot(v, l)]);
        if (l == v) {
          grad_mean.col(j) += gz.mean;
          grad_log_var.col(j) += gz.log_var;
        } else {
          grad_out.col(j) = gz.mean;
          grad_out.col(n + j) = gz.log_var;
        }
      }
      if (l == v) continue;
      const Matrix& out = f.corr_out[static_cast<std::size_t>(l - 1)];
      mask_clamped(out.rightCols(n), grad_out.rightCols(n));
      const Matrix grad_in =
          model.correspondence(l, v).backward(f.corr_cache[static_cast<std::size_t>(l - 1)], grad_out, true);
      grad_mean += grad_in.leftCols(n);
      grad_log_var += grad_in.rightCols(n);
    }
    mask_clamped(f.log_var_raw, grad_log_var);
    model.encoder(v).backward(f.encoder_cache, grad_mean, grad_log_var, false);
  }
  return loss;
}

}  // namespace mvp
