#pragma once

#include <cstdint>
#include <string>

#include "mvp/engine.hpp"
#include "mvp/neural.hpp"

namespace mvp {

/// Tiny randomized model and batch for checking the analytic gradient of
/// the full objective against central differences.
struct ModelGradCheckConfig {
  int views = 2;
  Index d = 4;
  Index k = 2;
  Index hidden = 8;     // width of every hidden layer
  Index view_dim = 5;
  int samples = 4;      // batch size; sample 0 is complete, the rest random masks
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tolerance = 1e-4;
  double abs_floor = 1e-7;
  PriorMode prior_mode = PriorMode::cyclic;
  ObjectiveKind kind = ObjectiveKind::combined;
};

struct ModelGradCheckResult {
  GradCheckReport report;
  std::string worst_path;  // parameter with the largest relative error
  std::size_t parameters = 0;
};

ModelGradCheckResult check_model_gradients(const ModelGradCheckConfig& config);

}  // namespace mvp
