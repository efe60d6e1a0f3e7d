#pragma once

#include <cstdint>
#include <vector>

#include "mvp/dataset.hpp"
#include "mvp/latent.hpp"
#include "mvp/model.hpp"

namespace mvp {

struct ClusterReport {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  std::vector<int> assignments;
};

/// Averaged latents z_bar^(l): geometric average of column l over the observed rows.
std::vector<DiagonalGaussian> averaged_latents(const LatentMatrix& z);

/// omega of one sample: fusion of the first k dims of the L averaged latents.
DiagonalGaussian consensus_omega(const LatentMatrix& z, Index k);

/// N x k matrix of omega means, using the dataset's masks and the model's k.
Matrix consensus_embedding(const MultiViewDataset& data, const ModelParams& model);

struct KMeansConfig {
  int restarts = 10;
  int max_iter = 300;
  double tol = 1e-4;  // relative to the mean per-feature variance
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centroids;  // clusters x features
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding on the rows of `points`; the
/// restart with the lowest inertia wins. Empty clusters are re-seeded at
/// the point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, int clusters, const KMeansConfig& config = {});

/// Minimum-cost assignment for a square cost matrix; result[row] = column.
std::vector<int> hungarian(const Matrix& cost);

double clustering_accuracy(const std::vector<int>& truth, const std::vector<int>& pred);
double normalized_mutual_information(const std::vector<int>& truth, const std::vector<int>& pred);
double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& pred);
ClusterReport clustering_metrics(const std::vector<int>& truth, const std::vector<int>& pred);

/// Reconstructs all L views of one sample from its observed views by
/// decoding [omega mean ; z_bar^(l) mean] through decoder l.
SampleViews infer_missing_views(const SampleViews& sample, const Mask& mask, const ModelParams& model);

struct ViewImputation {
  double model_mse = 0.0;     // over missing entries
  double baseline_mse = 0.0;  // per-feature mean imputation over the same entries
  Index missing = 0;          // number of missing samples
};

struct ImputationReport {
  std::vector<Matrix> reconstructions;  // one N x d_v matrix per view
  std::vector<ViewImputation> views;
  double model_mse = 0.0;  // pooled over all missing entries
  double baseline_mse = 0.0;
};

/// Reconstructs every sample and scores missing entries against the
/// ground truth held in `data` (its masks mark what the model may see).
ImputationReport evaluate_imputation(const MultiViewDataset& data, const ModelParams& model);

}  // namespace mvp
