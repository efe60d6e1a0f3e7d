#include "mvp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

std::vector<DiagonalGaussian> averaged_latents(const LatentMatrix& z) {
  std::vector<DiagonalGaussian> out;
  for (int l = 1; l <= z.views(); ++l) {
    const auto cell = single_view_cell(z, l);
    out.push_back(geometric_average(cell));
  }
  return out;
}

DiagonalGaussian consensus_omega(const LatentMatrix& z, Index k) {
  const auto avg = averaged_latents(z);
  return geometric_mean_fusion(avg, k);
}

Matrix consensus_embedding(const MultiViewDataset& data, const ModelParams& model) {
  require(data.views() == model.views(), "consensus_embedding: dataset has " + std::to_string(data.views()) +
                                             " views, model has " + std::to_string(model.views()));
  const Index k = model.dims().k;
  Matrix out(data.size(), k);
  for (Index i = 0; i < data.size(); ++i) {
    const LatentMatrix z = build_latent_matrix(data.sample(i), data.masks()[static_cast<std::size_t>(i)], model);
    out.row(i) = consensus_omega(z, k).mean().transpose();
  }
  return out;
}

namespace {

double squared_distance(const Matrix& points, Index i, const Matrix& centroids, Index c) {
  return (points.row(i) - centroids.row(c)).squaredNorm();
}

Matrix plus_plus_init(const Matrix& points, int clusters, Rng& rng) {
  const Index n = points.rows();
  Matrix centroids(clusters, points.cols());
  centroids.row(0) = points.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(points, i, centroids, 0);
  for (int c = 1; c < clusters; ++c) {
    double total = 0.0;
    for (double x : d2) total += x;
    Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(points, i, centroids, c));
    }
  }
  return centroids;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<int>& labels) {
  double inertia = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(points, i, centroids, 0);
    for (Index c = 1; c < centroids.rows(); ++c) {
      const double d = squared_distance(points, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    inertia += best_d;
  }
  return inertia;
}

KMeansResult lloyd(const Matrix& points, int clusters, const KMeansConfig& config, double tol, Rng& rng) {
  const Index n = points.rows();
  KMeansResult r;
  r.centroids = plus_plus_init(points, clusters, rng);
  r.assignments.assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < config.max_iter; ++it) {
    assign(points, r.centroids, r.assignments);
    Matrix next = Matrix::Zero(clusters, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(clusters), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = r.assignments[static_cast<std::size_t>(i)];
      next.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it to the point currently worst served.
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const double d = squared_distance(points, i, r.centroids, r.assignments[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(c) = points.row(far);
    }
    const double shift = (next - r.centroids).squaredNorm();
    r.centroids = std::move(next);
    if (shift <= tol) break;
  }
  r.inertia = assign(points, r.centroids, r.assignments);
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int clusters, const KMeansConfig& config) {
  require(clusters >= 1, "kmeans: need at least one cluster");
  require(points.rows() >= clusters, "kmeans: " + std::to_string(clusters) + " clusters for " +
                                         std::to_string(points.rows()) + " points");
  require(config.restarts >= 1 && config.max_iter >= 1, "kmeans: restarts and max_iter must be >= 1");
  require(points.allFinite(), "kmeans: non-finite input");
  const Matrix centered = points.rowwise() - points.colwise().mean();
  const double mean_var = centered.squaredNorm() / static_cast<double>(points.rows() * points.cols());
  const double tol = config.tol * mean_var;

  Rng root(config.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < config.restarts; ++r) {
    Rng rng = root.split();
    KMeansResult cand = lloyd(points, clusters, config, tol, rng);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

std::vector<int> hungarian(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "hungarian: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (columns); p[j] = row matched to column j (1-based, 0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) result[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return result;
}

namespace {

struct Contingency {
  Matrix counts;  // true class x predicted cluster
  std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& truth, const std::vector<int>& pred) {
  require(truth.size() == pred.size(), "clustering metrics: " + std::to_string(truth.size()) + " labels vs " +
                                           std::to_string(pred.size()) + " assignments");
  require(!truth.empty(), "clustering metrics: empty input");
  std::map<int, Index> rows, cols;
  for (int t : truth) rows.emplace(t, 0);
  for (int p : pred) cols.emplace(p, 0);
  Index r = 0;
  for (auto& [key, idx] : rows) idx = r++;
  Index c = 0;
  for (auto& [key, idx] : cols) idx = c++;
  Contingency out{Matrix::Zero(r, c), truth.size()};
  for (std::size_t i = 0; i < truth.size(); ++i) out.counts(rows[truth[i]], cols[pred[i]]) += 1.0;
  return out;
}

double entropy(const Vector& counts, double n) {
  double h = 0.0;
  for (Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) {
      const double p = counts[i] / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

double comb2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

double clustering_accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  const Contingency ct = contingency(truth, pred);
  const Index m = std::max(ct.counts.rows(), ct.counts.cols());
  Matrix cost = Matrix::Zero(m, m);
  cost.topLeftCorner(ct.counts.rows(), ct.counts.cols()) = -ct.counts;
  const auto match = hungarian(cost);
  double hits = 0.0;
  for (Index i = 0; i < m; ++i) hits -= cost(i, match[static_cast<std::size_t>(i)]);
  return hits / static_cast<double>(ct.n);
}

double normalized_mutual_information(const std::vector<int>& truth, const std::vector<int>& pred) {
  const Contingency ct = contingency(truth, pred);
  const double n = static_cast<double>(ct.n);
  const Vector a = ct.counts.rowwise().sum();
  const Vector b = ct.counts.colwise().sum().transpose();
  const double ha = entropy(a, n);
  const double hb = entropy(b, n);
  // Both partitions trivial: identical up to labels.
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (Index i = 0; i < ct.counts.rows(); ++i) {
    for (Index j = 0; j < ct.counts.cols(); ++j) {
      const double nij = ct.counts(i, j);
      if (nij > 0.0) mi += nij / n * std::log(n * nij / (a[i] * b[j]));
    }
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& pred) {
  const Contingency ct = contingency(truth, pred);
  double sum_ij = 0.0;
  for (Index i = 0; i < ct.counts.rows(); ++i) {
    for (Index j = 0; j < ct.counts.cols(); ++j) sum_ij += comb2(ct.counts(i, j));
  }
  double sum_a = 0.0, sum_b = 0.0;
  const Vector a = ct.counts.rowwise().sum();
  const Vector b = ct.counts.colwise().sum().transpose();
  for (Index i = 0; i < a.size(); ++i) sum_a += comb2(a[i]);
  for (Index j = 0; j < b.size(); ++j) sum_b += comb2(b[j]);
  const double total = comb2(static_cast<double>(ct.n));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

ClusterReport clustering_metrics(const std::vector<int>& truth, const std::vector<int>& pred) {
  return {clustering_accuracy(truth, pred), normalized_mutual_information(truth, pred),
          adjusted_rand_index(truth, pred), pred};
}

SampleViews infer_missing_views(const SampleViews& sample, const Mask& mask, const ModelParams& model) {
  const LatentMatrix z = build_latent_matrix(sample, mask, model);
  const Index k = model.dims().k;
  const Index d = model.dims().d;
  const auto avg = averaged_latents(z);
  const DiagonalGaussian omega = geometric_mean_fusion(avg, k);
  SampleViews out;
  Vector input(k + d);
  for (int l = 1; l <= model.views(); ++l) {
    input << omega.mean(), avg[static_cast<std::size_t>(l - 1)].mean();
    out.push_back(model.decoder(l).forward_one(input));
  }
  return out;
}

ImputationReport evaluate_imputation(const MultiViewDataset& data, const ModelParams& model) {
  const int L = data.views();
  require(L == model.views(), "evaluate_imputation: view count mismatch");
  ImputationReport report;
  report.views.resize(static_cast<std::size_t>(L));
  for (int v = 1; v <= L; ++v) report.reconstructions.emplace_back(data.size(), data.view_dim(v));

  for (Index i = 0; i < data.size(); ++i) {
    const auto rec = infer_missing_views(data.sample(i), data.masks()[static_cast<std::size_t>(i)], model);
    for (int v = 1; v <= L; ++v) {
      report.reconstructions[static_cast<std::size_t>(v - 1)].row(i) = rec[static_cast<std::size_t>(v - 1)].transpose();
    }
  }

  double model_sse = 0.0, base_sse = 0.0;
  double entries = 0.0;
  for (int v = 1; v <= L; ++v) {
    const Matrix& x = data.view(v);
    Vector mean = Vector::Zero(x.cols());
    Index seen = 0;
    for (Index i = 0; i < data.size(); ++i) {
      if (data.masks()[static_cast<std::size_t>(i)][static_cast<std::size_t>(v - 1)]) {
        mean += x.row(i).transpose();
        ++seen;
      }
    }
    if (seen > 0) mean /= static_cast<double>(seen);
    auto& vi = report.views[static_cast<std::size_t>(v - 1)];
    double m_sse = 0.0, b_sse = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
      if (data.masks()[static_cast<std::size_t>(i)][static_cast<std::size_t>(v - 1)]) continue;
      ++vi.missing;
      m_sse += (report.reconstructions[static_cast<std::size_t>(v - 1)].row(i) - x.row(i)).squaredNorm();
      b_sse += (mean.transpose() - x.row(i)).squaredNorm();
    }
    const double cells = static_cast<double>(vi.missing * x.cols());
    if (cells > 0.0) {
      vi.model_mse = m_sse / cells;
      vi.baseline_mse = b_sse / cells;
    }
    model_sse += m_sse;
    base_sse += b_sse;
    entries += cells;
  }
  if (entries > 0.0) {
    report.model_mse = model_sse / entries;
    report.baseline_mse = base_sse / entries;
  }
  return report;
}

}  // namespace mvp
