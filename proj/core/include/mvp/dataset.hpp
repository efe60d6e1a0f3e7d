#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvp/gaussian.hpp"
#include "mvp/latent.hpp"
#include "mvp/permutation.hpp"

namespace mvp {

/// N samples observed through L views; views[v] is N x d_v (one sample per row).
class MultiViewDataset {
 public:
  explicit MultiViewDataset(std::vector<Matrix> views, std::optional<std::vector<int>> labels = {});

  int views() const { return static_cast<int>(views_.size()); }
  Index size() const { return views_.front().rows(); }
  const Matrix& view(int v) const { return views_.at(static_cast<std::size_t>(v - 1)); }
  Index view_dim(int v) const { return view(v).cols(); }
  std::vector<Index> view_dims() const;

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;

  /// All-ones until masks are attached.
  const MaskMatrix& masks() const { return masks_; }
  void set_masks(MaskMatrix masks);

  SampleViews sample(Index i) const;

 private:
  std::vector<Matrix> views_;
  std::optional<std::vector<int>> labels_;
  MaskMatrix masks_;
};

struct SyntheticConfig {
  Index n = 600;
  int clusters = 3;
  int views = 3;
  std::vector<Index> view_dims{10, 10, 10};
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  Index shared_dim = 4;         // dimension of the shared latent
  double centroid_scale = 2.0;  // sd of cluster centroids
  double jitter = 0.35;         // sd of per-sample deviation from the centroid
};

/// Cluster centroid + jitter gives a shared latent h; view v is
/// tanh(W_v h + b_v) + noise_sigma * eps. Labels are assigned round-robin.
MultiViewDataset gen_synthetic(const SyntheticConfig& config);

/// Marks exactly floor(eta * n) samples incomplete. Each incomplete sample
/// drops a uniform count in {1..L-1} of uniformly chosen views.
MaskMatrix gen_masks(Index n, int views, double eta, std::uint64_t seed);

inline constexpr int kDefaultPoolSize = 8;

/// Per sample: the mask and `pool` precomputed permutation bundles. The
/// trainer uses bundle (epoch mod pool).
struct FingerprintRecord {
  Mask mask;
  std::vector<PermutationBundle> bundles;
};

struct Fingerprint {
  int views = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::vector<FingerprintRecord> records;

  int pool_size() const { return records.empty() ? 0 : static_cast<int>(records.front().bundles.size()); }
  MaskMatrix masks() const;
};

Fingerprint build_fingerprint(const MaskMatrix& masks, std::uint64_t seed, double eta,
                              int pool = kDefaultPoolSize);

/// JSON lines: a header {"version":1,"L","eta","seed","n","pool"} followed by
/// one record per sample {"mask":[..],"perms":[[..]..]} with 1-based
/// permutation maps; bundles beyond the first go to "extra_perms".
void write_fingerprint(const Fingerprint& fp, std::ostream& out);
void write_fingerprint(const Fingerprint& fp, const std::filesystem::path& path);
Fingerprint read_fingerprint(std::istream& in);
Fingerprint read_fingerprint(const std::filesystem::path& path);

/// The header's eta is authoritative; a differing flag value only warns.
double resolve_eta(const Fingerprint& fp, std::optional<double> flag_eta, std::ostream& warnings);

struct CsvOptions {
  bool header = false;
  bool zscore = false;
};

Matrix read_csv_matrix(const std::filesystem::path& path, bool header = false);
void write_csv_matrix(const Matrix& m, const std::filesystem::path& path);
std::vector<int> read_labels(const std::filesystem::path& path, bool header = false);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

MultiViewDataset load_csv(const std::vector<std::filesystem::path>& view_paths,
                          const std::optional<std::filesystem::path>& label_path,
                          const CsvOptions& options = {});

/// Standardizes each column to mean 0 and sd 1 (constant columns are only centered).
void zscore_columns(Matrix& m);

/// A dataset directory holds dataset.json {"views":[files], "labels":file?,
/// "header":bool, "zscore":bool} next to the CSV files.
MultiViewDataset load_dataset_dir(const std::filesystem::path& dir);
void save_dataset_dir(const MultiViewDataset& data, const std::filesystem::path& dir);

}  // namespace mvp
