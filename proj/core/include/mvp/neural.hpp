#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvp/gaussian.hpp"
#include "mvp/rng.hpp"

namespace mvp {

enum class Activation { relu, leaky_relu, tanh, linear };

inline constexpr double kLeakySlope = 0.01;

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// A trainable tensor paired with its gradient buffer.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
  std::string name;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  Activation activation = Activation::linear;
  Matrix grad_weight;
  Vector grad_bias;
};

/// Activations recorded by DenseNet::forward for the backward pass.
struct DenseCache {
  std::vector<Matrix> inputs;       // input of layer i
  std::vector<Matrix> pre_activation;
  bool valid = false;
};

/// Fully connected network. Batches are column-major: one sample per column.
class DenseNet {
 public:
  DenseNet() = default;

  /// widths = {in, h1, ..., out}; activations.size() == widths.size() - 1.
  /// He-uniform init for relu/leaky_relu layers, Xavier-uniform otherwise;
  /// biases start at zero.
  DenseNet(const std::vector<Index>& widths, const std::vector<Activation>& activations, Rng& rng);

  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Single linear layer with identity weights.
  static DenseNet identity(Index dim);

  Index in_dim() const;
  Index out_dim() const;
  std::size_t depth() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Matrix forward(const Matrix& input, DenseCache* cache = nullptr) const;
  Vector forward_one(const Vector& input) const;

  /// Accumulates parameter gradients and returns d loss / d input (an empty
  /// matrix when need_input_grad is false).
  Matrix backward(const DenseCache& cache, const Matrix& grad_output, bool need_input_grad = true);

  void zero_grad();
  void append_parameters(const std::string& prefix, std::vector<ParamRef>& out);
  std::size_t parameter_count() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct EncoderCache {
  DenseCache trunk;
  DenseCache mean_head;
  DenseCache log_var_head;
  Matrix features;
};

/// Trunk network followed by two linear heads producing (mean, log_var).
class EncoderNet {
 public:
  EncoderNet() = default;
  EncoderNet(Index input_dim, const std::vector<Index>& hidden, Activation hidden_activation,
             Index latent_dim, Rng& rng);
  EncoderNet(DenseNet trunk, DenseNet mean_head, DenseNet log_var_head);

  Index in_dim() const { return trunk_.in_dim(); }
  Index latent_dim() const { return mean_head_.out_dim(); }

  /// Returns {mean, log_var}, each latent_dim x batch. log_var is not clamped.
  std::pair<Matrix, Matrix> forward(const Matrix& input, EncoderCache* cache = nullptr) const;

  Matrix backward(const EncoderCache& cache, const Matrix& grad_mean, const Matrix& grad_log_var,
                  bool need_input_grad = false);

  void zero_grad();
  void append_parameters(const std::string& prefix, std::vector<ParamRef>& out);
  std::size_t parameter_count() const;

  const DenseNet& trunk() const { return trunk_; }
  const DenseNet& mean_head() const { return mean_head_; }
  const DenseNet& log_var_head() const { return log_var_head_; }

 private:
  DenseNet trunk_;
  DenseNet mean_head_;
  DenseNet log_var_head_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState(AdamConfig config, std::span<const ParamRef> params);

  const AdamConfig& config() const { return config_; }
  long step() const { return step_; }

 private:
  friend void adam_step(std::span<const ParamRef> params, AdamState& state);
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long step_ = 0;
};

/// Bias-corrected Adam update of every parameter from its gradient buffer.
void adam_step(std::span<const ParamRef> params, AdamState& state);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
  bool passed = true;
};

/// Compares `analytic` to central differences of `loss` w.r.t. `params`
/// (perturbed in place and restored). Relative error per entry is
/// |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport grad_check(const std::function<double()>& loss, std::span<double> params,
                           std::span<const double> analytic, double h, double tolerance,
                           double abs_floor = 1e-7);

}  // namespace mvp
