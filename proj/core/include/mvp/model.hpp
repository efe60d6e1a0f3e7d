#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/neural.hpp"

namespace mvp {

/// Hidden-layer widths and activations of the three network families.
/// Defaults follow the tabular recipe: encoders d_v-256-256-1024-d,
/// correspondences d-128-256-128-d, decoders (k+d)-1024-256-256-d_v.
struct Architecture {
  std::vector<Index> encoder_hidden{256, 256, 1024};
  std::vector<Index> correspondence_hidden{128, 256, 128};
  std::vector<Index> decoder_hidden{1024, 256, 256};
  Activation encoder_activation = Activation::relu;
  Activation correspondence_activation = Activation::leaky_relu;
  Activation decoder_activation = Activation::relu;
  Activation decoder_output = Activation::linear;

  bool operator==(const Architecture&) const = default;
};

struct ModelDims {
  std::vector<Index> view_dims;
  Index d = 16;  // latent dimension
  Index k = 16;  // shared (consensus) dimension, k <= d

  int views() const { return static_cast<int>(view_dims.size()); }
  bool operator==(const ModelDims&) const = default;
};

/// All trainable networks: L encoders, L(L-1) correspondences f_{l<-v} and
/// L decoders. View indices in the accessors are 1-based.
class ModelParams {
 public:
  ModelParams(ModelDims dims, Architecture arch, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  int views() const { return dims_.views(); }

  EncoderNet& encoder(int v) { return encoders_.at(static_cast<std::size_t>(v - 1)); }
  const EncoderNet& encoder(int v) const { return encoders_.at(static_cast<std::size_t>(v - 1)); }

  /// Correspondence mapping view `source`'s latent into view `target`'s space.
  DenseNet& correspondence(int target, int source);
  const DenseNet& correspondence(int target, int source) const;

  DenseNet& decoder(int l) { return decoders_.at(static_cast<std::size_t>(l - 1)); }
  const DenseNet& decoder(int l) const { return decoders_.at(static_cast<std::size_t>(l - 1)); }
  const std::vector<DenseNet>& decoders() const { return decoders_; }

  /// Declaration order: encoders 1..L, correspondences (target-major, source
  /// ascending, skipping target == source), decoders 1..L.
  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  /// Flattened copies in declaration order.
  std::vector<double> flat_values();
  std::vector<double> flat_gradients();
  void set_flat_values(std::span<const double> values);

  /// Human-readable name of a flat parameter index, e.g.
  /// "decoder[2].layer[0].weight[17]".
  std::string parameter_path(std::size_t flat_index);

 private:
  std::size_t correspondence_slot(int target, int source) const;

  ModelDims dims_;
  Architecture arch_;
  std::uint64_t seed_;
  std::vector<EncoderNet> encoders_;
  std::vector<DenseNet> correspondences_;
  std::vector<DenseNet> decoders_;
};

/// Parameter count implied by (dims, arch), computed without allocating.
std::size_t expected_parameter_count(const ModelDims& dims, const Architecture& arch);

}  // namespace mvp
