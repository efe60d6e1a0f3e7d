#include "mvp/model.hpp"

#include <algorithm>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

ModelParams::ModelParams(ModelDims dims, Architecture arch, std::uint64_t seed)
    : dims_(std::move(dims)), arch_(std::move(arch)), seed_(seed) {
  const int L = dims_.views();
  require(L >= 1, "ModelParams: at least one view required");
  require(dims_.d >= 1, "ModelParams: latent dimension d must be >= 1");
  require(dims_.k >= 1 && dims_.k <= dims_.d, "ModelParams: need 1 <= k <= d");
  for (Index dv : dims_.view_dims) require(dv >= 1, "ModelParams: view dimensions must be >= 1");

  Rng rng(seed_);
  for (int v = 0; v < L; ++v) {
    encoders_.emplace_back(dims_.view_dims[static_cast<std::size_t>(v)], arch_.encoder_hidden,
                           arch_.encoder_activation, dims_.d, rng);
  }
  std::vector<Index> corr_widths{dims_.d};
  corr_widths.insert(corr_widths.end(), arch_.correspondence_hidden.begin(),
                     arch_.correspondence_hidden.end());
  corr_widths.push_back(dims_.d);
  std::vector<Activation> corr_acts(arch_.correspondence_hidden.size(),
                                    arch_.correspondence_activation);
  corr_acts.push_back(Activation::linear);
  for (int l = 0; l < L; ++l) {
    for (int v = 0; v < L; ++v) {
      if (l == v) continue;
      correspondences_.emplace_back(corr_widths, corr_acts, rng);
    }
  }
  for (int l = 0; l < L; ++l) {
    std::vector<Index> widths{dims_.k + dims_.d};
    widths.insert(widths.end(), arch_.decoder_hidden.begin(), arch_.decoder_hidden.end());
    widths.push_back(dims_.view_dims[static_cast<std::size_t>(l)]);
    std::vector<Activation> acts(arch_.decoder_hidden.size(), arch_.decoder_activation);
    acts.push_back(arch_.decoder_output);
    decoders_.emplace_back(widths, acts, rng);
  }
}

std::size_t ModelParams::correspondence_slot(int target, int source) const {
  const int L = views();
  require(target >= 1 && target <= L && source >= 1 && source <= L && target != source,
          "correspondence(" + std::to_string(target) + ", " + std::to_string(source) +
              "): indices must be distinct views in [1, " + std::to_string(L) + "]");
  const int t = target - 1;
  const int s = source - 1;
  return static_cast<std::size_t>(t * (L - 1) + (s < t ? s : s - 1));
}

DenseNet& ModelParams::correspondence(int target, int source) {
  return correspondences_[correspondence_slot(target, source)];
}

const DenseNet& ModelParams::correspondence(int target, int source) const {
  return correspondences_[correspondence_slot(target, source)];
}

std::vector<ParamRef> ModelParams::parameters() {
  std::vector<ParamRef> out;
  const int L = views();
  for (int v = 1; v <= L; ++v) encoder(v).append_parameters("encoder[" + std::to_string(v) + "]", out);
  for (int l = 1; l <= L; ++l) {
    for (int v = 1; v <= L; ++v) {
      if (l == v) continue;
      correspondence(l, v).append_parameters(
          "correspondence[" + std::to_string(l) + "<-" + std::to_string(v) + "]", out);
    }
  }
  for (int l = 1; l <= L; ++l) decoder(l).append_parameters("decoder[" + std::to_string(l) + "]", out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : encoders_) n += e.parameter_count();
  for (const auto& c : correspondences_) n += c.parameter_count();
  for (const auto& d : decoders_) n += d.parameter_count();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& e : encoders_) e.zero_grad();
  for (auto& c : correspondences_) c.zero_grad();
  for (auto& d : decoders_) d.zero_grad();
}

std::vector<double> ModelParams::flat_values() {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& p : parameters()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

std::vector<double> ModelParams::flat_gradients() {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& p : parameters()) out.insert(out.end(), p.grad.begin(), p.grad.end());
  return out;
}

void ModelParams::set_flat_values(std::span<const double> values) {
  require(values.size() == parameter_count(),
          "set_flat_values: expected " + std::to_string(parameter_count()) + " values, got " +
              std::to_string(values.size()));
  std::size_t offset = 0;
  for (const auto& p : parameters()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), p.value.size(), p.value.begin());
    offset += p.value.size();
  }
}

std::string ModelParams::parameter_path(std::size_t flat_index) {
  std::size_t offset = 0;
  for (const auto& p : parameters()) {
    if (flat_index < offset + p.value.size()) {
      return p.name + "[" + std::to_string(flat_index - offset) + "]";
    }
    offset += p.value.size();
  }
  throw ContractViolation("parameter index " + std::to_string(flat_index) + " out of range");
}

namespace {

std::size_t dense_count(const std::vector<Index>& widths) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    n += static_cast<std::size_t>(widths[i - 1] * widths[i] + widths[i]);
  }
  return n;
}

}  // namespace

std::size_t expected_parameter_count(const ModelDims& dims, const Architecture& arch) {
  require(!arch.encoder_hidden.empty(), "encoder needs at least one hidden layer");
  const auto L = static_cast<std::size_t>(dims.views());
  std::size_t n = 0;
  for (Index dv : dims.view_dims) {
    std::vector<Index> trunk{dv};
    trunk.insert(trunk.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
    n += dense_count(trunk) + 2 * dense_count({arch.encoder_hidden.back(), dims.d});
  }
  std::vector<Index> corr{dims.d};
  corr.insert(corr.end(), arch.correspondence_hidden.begin(), arch.correspondence_hidden.end());
  corr.push_back(dims.d);
  n += L * (L - 1) * dense_count(corr);
  for (Index dv : dims.view_dims) {
    std::vector<Index> dec{dims.k + dims.d};
    dec.insert(dec.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
    dec.push_back(dv);
    n += dense_count(dec);
  }
  return n;
}

}  // namespace mvp
