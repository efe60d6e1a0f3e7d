#include "mvp/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

namespace {

void apply_activation(Activation a, Matrix& m) {
  switch (a) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::leaky_relu:
      m = m.unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; });
      break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::linear: break;
  }
}

// grad *= activation'(pre)
void apply_activation_grad(Activation a, const Matrix& pre, Matrix& grad) {
  switch (a) {
    case Activation::relu:
      grad = grad.binaryExpr(pre, [](double g, double x) { return x > 0.0 ? g : 0.0; });
      break;
    case Activation::leaky_relu:
      grad = grad.binaryExpr(pre, [](double g, double x) { return x > 0.0 ? g : kLeakySlope * g; });
      break;
    case Activation::tanh:
      grad = grad.binaryExpr(pre, [](double g, double x) {
        const double t = std::tanh(x);
        return g * (1.0 - t * t);
      });
      break;
    case Activation::linear: break;
  }
}

}  // namespace

DenseNet::DenseNet(const std::vector<Index>& widths, const std::vector<Activation>& activations,
                   Rng& rng) {
  require(widths.size() >= 2, "DenseNet: need at least input and output widths");
  require(activations.size() == widths.size() - 1, "DenseNet: one activation per layer required");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const Index in = widths[i];
    const Index out = widths[i + 1];
    require(in >= 1 && out >= 1, "DenseNet: layer widths must be positive");
    const Activation act = activations[i];
    const bool rectifier = act == Activation::relu || act == Activation::leaky_relu;
    const double bound = rectifier ? std::sqrt(6.0 / static_cast<double>(in))
                                   : std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weight.resize(out, in);
    // Column-major fill keeps the draw order fixed for reproducibility.
    for (Index c = 0; c < in; ++c) {
      for (Index r = 0; r < out; ++r) layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    }
    layer.bias = Vector::Zero(out);
    layer.activation = act;
    layer.grad_weight = Matrix::Zero(out, in);
    layer.grad_bias = Vector::Zero(out);
    layers_.push_back(std::move(layer));
  }
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "DenseNet: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    require(l.bias.size() == l.weight.rows(), "DenseNet: bias size does not match weight rows");
    if (i > 0) {
      require(l.weight.cols() == layers_[i - 1].weight.rows(),
              "DenseNet: layer " + std::to_string(i) + " input width does not chain");
    }
    require(l.weight.allFinite() && l.bias.allFinite(), "DenseNet: non-finite parameter");
    l.grad_weight = Matrix::Zero(l.weight.rows(), l.weight.cols());
    l.grad_bias = Vector::Zero(l.bias.size());
  }
}

DenseNet DenseNet::identity(Index dim) {
  DenseLayer layer;
  layer.weight = Matrix::Identity(dim, dim);
  layer.bias = Vector::Zero(dim);
  layer.activation = Activation::linear;
  std::vector<DenseLayer> layers;
  layers.push_back(std::move(layer));
  return DenseNet(std::move(layers));
}

Index DenseNet::in_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
Index DenseNet::out_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

Matrix DenseNet::forward(const Matrix& input, DenseCache* cache) const {
  require(!layers_.empty(), "DenseNet::forward on an empty network");
  require(input.rows() == in_dim(), "DenseNet::forward: input has " +
                                        std::to_string(input.rows()) + " rows, expected " +
                                        std::to_string(in_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre_activation.clear();
    cache->valid = true;
  }
  Matrix h = input;
  for (const auto& layer : layers_) {
    Matrix pre = layer.weight * h;
    pre.colwise() += layer.bias;
    if (cache) cache->inputs.push_back(std::move(h));
    h = pre;
    apply_activation(layer.activation, h);
    if (cache) cache->pre_activation.push_back(std::move(pre));
  }
  return h;
}

Vector DenseNet::forward_one(const Vector& input) const {
  Matrix m = forward(Matrix(input));
  return m.col(0);
}

Matrix DenseNet::backward(const DenseCache& cache, const Matrix& grad_output, bool need_input_grad) {
  require(cache.valid && cache.inputs.size() == layers_.size(),
          "DenseNet::backward called without a matching forward cache");
  require(grad_output.rows() == out_dim() && grad_output.cols() == cache.inputs.back().cols(),
          "DenseNet::backward: upstream gradient shape mismatch");
  Matrix grad = grad_output;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    auto& layer = layers_[idx];
    apply_activation_grad(layer.activation, cache.pre_activation[idx], grad);
    layer.grad_weight.noalias() += grad * cache.inputs[idx].transpose();
    layer.grad_bias += grad.rowwise().sum();
    if (idx > 0 || need_input_grad) {
      Matrix next = layer.weight.transpose() * grad;
      grad = std::move(next);
    }
  }
  return need_input_grad ? grad : Matrix();
}

void DenseNet::zero_grad() {
  for (auto& l : layers_) {
    l.grad_weight.setZero();
    l.grad_bias.setZero();
  }
}

void DenseNet::append_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const std::string base = prefix + ".layer[" + std::to_string(i) + "]";
    out.push_back({std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())),
                   std::span<double>(l.grad_weight.data(),
                                     static_cast<std::size_t>(l.grad_weight.size())),
                   base + ".weight"});
    out.push_back({std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())),
                   std::span<double>(l.grad_bias.data(), static_cast<std::size_t>(l.grad_bias.size())),
                   base + ".bias"});
  }
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

EncoderNet::EncoderNet(Index input_dim, const std::vector<Index>& hidden,
                       Activation hidden_activation, Index latent_dim, Rng& rng) {
  require(!hidden.empty(), "EncoderNet: at least one hidden layer required");
  std::vector<Index> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  trunk_ = DenseNet(widths, std::vector<Activation>(hidden.size(), hidden_activation), rng);
  mean_head_ = DenseNet({hidden.back(), latent_dim}, {Activation::linear}, rng);
  log_var_head_ = DenseNet({hidden.back(), latent_dim}, {Activation::linear}, rng);
}

EncoderNet::EncoderNet(DenseNet trunk, DenseNet mean_head, DenseNet log_var_head)
    : trunk_(std::move(trunk)), mean_head_(std::move(mean_head)), log_var_head_(std::move(log_var_head)) {
  require(mean_head_.in_dim() == trunk_.out_dim() && log_var_head_.in_dim() == trunk_.out_dim(),
          "EncoderNet: heads must consume the trunk output");
  require(mean_head_.out_dim() == log_var_head_.out_dim(), "EncoderNet: head widths differ");
}

std::pair<Matrix, Matrix> EncoderNet::forward(const Matrix& input, EncoderCache* cache) const {
  if (cache) {
    cache->features = trunk_.forward(input, &cache->trunk);
    return {mean_head_.forward(cache->features, &cache->mean_head),
            log_var_head_.forward(cache->features, &cache->log_var_head)};
  }
  const Matrix features = trunk_.forward(input);
  return {mean_head_.forward(features), log_var_head_.forward(features)};
}

Matrix EncoderNet::backward(const EncoderCache& cache, const Matrix& grad_mean,
                            const Matrix& grad_log_var, bool need_input_grad) {
  Matrix grad_features = mean_head_.backward(cache.mean_head, grad_mean);
  grad_features += log_var_head_.backward(cache.log_var_head, grad_log_var);
  return trunk_.backward(cache.trunk, grad_features, need_input_grad);
}

void EncoderNet::zero_grad() {
  trunk_.zero_grad();
  mean_head_.zero_grad();
  log_var_head_.zero_grad();
}

void EncoderNet::append_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  trunk_.append_parameters(prefix + ".trunk", out);
  mean_head_.append_parameters(prefix + ".mean_head", out);
  log_var_head_.append_parameters(prefix + ".log_var_head", out);
}

std::size_t EncoderNet::parameter_count() const {
  return trunk_.parameter_count() + mean_head_.parameter_count() + log_var_head_.parameter_count();
}

AdamState::AdamState(AdamConfig config, std::span<const ParamRef> params) : config_(config) {
  require(config_.lr > 0.0 && config_.epsilon > 0.0, "Adam: lr and epsilon must be positive");
  for (const auto& p : params) {
    first_.emplace_back(p.value.size(), 0.0);
    second_.emplace_back(p.value.size(), 0.0);
  }
}

void adam_step(std::span<const ParamRef> params, AdamState& state) {
  require(params.size() == state.first_.size(), "adam_step: parameter group count mismatch");
  const auto& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t g = 0; g < params.size(); ++g) {
    const auto& p = params[g];
    auto& m = state.first_[g];
    auto& v = state.second_[g];
    require(p.value.size() == m.size() && p.grad.size() == m.size(),
            "adam_step: shape mismatch in parameter '" + p.name + "'");
    // Chunked so the three updates share one trip through memory.
    constexpr std::size_t kChunk = 2048;
    for (std::size_t start = 0; start < m.size(); start += kChunk) {
      const auto n = static_cast<Index>(std::min(kChunk, m.size() - start));
      Eigen::Map<const Eigen::ArrayXd> grad(p.grad.data() + start, n);
      Eigen::Map<Eigen::ArrayXd> value(p.value.data() + start, n);
      Eigen::Map<Eigen::ArrayXd> first(m.data() + start, n);
      Eigen::Map<Eigen::ArrayXd> second(v.data() + start, n);
      first = c.beta1 * first + (1.0 - c.beta1) * grad;
      second = c.beta2 * second + (1.0 - c.beta2) * grad.square();
      value -= c.lr * (first / correction1) / ((second / correction2).sqrt() + c.epsilon);
    }
  }
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<double> params,
                           std::span<const double> analytic, double h, double tolerance,
                           double abs_floor) {
  require(params.size() == analytic.size(), "grad_check: analytic gradient size mismatch");
  require(h > 0.0, "grad_check: step must be positive");
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (!(rel < tolerance)) ++report.failures;
    if (rel > report.max_rel_error || std::isnan(rel)) {
      report.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.failures == 0;
  return report;
}

}  // namespace mvp
