#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvp/model.hpp"
#include "mvp/objective.hpp"

namespace mvp {

/// One sample of a mini-batch. `views` must list all L views; entries of
/// missing views are never read.
struct BatchItem {
  const SampleViews* views = nullptr;
  std::span<const std::uint8_t> mask;
  std::span<const Permutation> columns;  // one permutation per column
  const SampleNoise* noise = nullptr;
};

enum class ObjectiveKind { basic, combined };

/// Batched evaluation of the training objective. Returns the batch mean of
/// the per-sample breakdowns. When `compute_grad` is set, gradients of the
/// mean total are accumulated into the model's gradient buffers (call
/// ModelParams::zero_grad first). Throws NumericalError when a forward value
/// is not finite.
LossBreakdown evaluate_batch(ModelParams& model, std::span<const BatchItem> batch, ObjectiveKind kind,
                             const ObjectiveConfig& config, bool compute_grad);

}  // namespace mvp
