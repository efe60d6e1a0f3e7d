#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvp/dataset.hpp"
#include "mvp/model.hpp"
#include "mvp/objective.hpp"

namespace mvp {

struct TrainConfig {
  Index d = 16;
  Index k = 16;
  double beta_z = 5.0;
  double beta_omega = 2.5;
  int warmup_epochs = 100;
  int epochs = 300;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  PriorMode prior_mode = PriorMode::cyclic;
  /// Apply beta_z / beta_omega during warm-up too; when false warm-up uses 1.
  bool beta_in_warmup = true;
  Architecture arch;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochLog {
  int epoch = 0;  // 0-based; epochs < warmup_epochs are "warmup"
  std::string phase;
  double recon = 0.0;  // reconstruction loss, i.e. the negated log-likelihood
  double kl_z = 0.0;
  double kl_omega = 0.0;
  double total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam over the basic bound during warm-up and the combined
/// bound afterwards. Sample i uses fingerprint bundle (epoch mod pool).
/// Throws NumericalError naming the offending term when a loss goes non-finite.
TrainResult train(const MultiViewDataset& data, const Fingerprint& fp, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_log_jsonl(const std::vector<EpochLog>& log, std::ostream& out);
std::string epoch_log_json(const EpochLog& e);

/// Canonical JSON text of a configuration (keys sorted).
std::string config_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

/// One-line JSON header followed by the parameters as little-endian float64
/// in declaration order.
void save_checkpoint(const ModelParams& params, const TrainConfig& config, const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

/// Header and size are validated before the parameter buffers are allocated.
/// With `expected_view_dims`, a mismatch fails naming the first differing view.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::vector<Index>>& expected_view_dims = std::nullopt);

}  // namespace mvp
