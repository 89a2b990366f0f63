#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alix/lix.hpp"
#include "alix/rng.hpp"
#include "alix/tensor.hpp"

namespace alix {

enum class LixPlacement { none, after_each_nonlinearity, after_final_nonlinearity };

std::string to_string(LixPlacement p);
LixPlacement lix_placement_from_string(const std::string& s);

struct EncoderConfig {
  std::size_t channels_in = 2;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::vector<std::size_t> feature_maps{32, 32, 32};
  std::vector<std::pair<std::size_t, std::size_t>> filter_sizes{{3, 3}, {3, 3}, {3, 3}};
  std::vector<std::size_t> strides{2, 1, 1};
  std::size_t padding = 0;
  LixPlacement lix_placement = LixPlacement::none;
  std::size_t trunk_dim = 50;

  /// Throws std::invalid_argument on inconsistent lists, zero strides, a zero
  /// trunk or layers that do not fit the input.
  void validate() const;
  /// Spatial extents after each conv layer, starting from the input.
  std::vector<std::pair<std::size_t, std::size_t>> spatial_shapes() const;
  /// [C, Hf, Wf] of the final feature map.
  Shape feature_shape() const;
};

/// Convolutional encoder followed by a trunk (linear, layer norm, tanh).
struct Encoder {
  EncoderConfig config;
  std::vector<Tensor> conv_weight;
  std::vector<Tensor> conv_bias;
  Tensor trunk_weight;
  Tensor trunk_bias;
  Tensor norm_gain;
  Tensor norm_shift;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

/// LIX settings for one forward pass. With `shifts` set, those fields are
/// used verbatim (one per LIX layer); otherwise fresh fields are drawn from
/// `rng` with the given radius.
struct LixContext {
  double radius = 0.0;
  Rng* rng = nullptr;
  ShiftGranularity granularity = ShiftGranularity::per_location;
  const std::vector<ShiftField>* shifts = nullptr;
};

struct EncoderOutput {
  Tensor features;                  // z: last post-nonlinearity (post-LIX if placed) activation
  Tensor trunk;                     // [B, trunk_dim]
  std::vector<Tensor> lix_outputs;  // outputs of every LIX layer, in order
  std::vector<ShiftField> shifts;   // fields actually used
};

Encoder build_encoder(const EncoderConfig& cfg, Rng& rng);

/// Runs the conv stack (and LIX layers, when placed and `lix` is given).
/// Gradients of `features` and of each LIX output are readable after a
/// backward pass through the returned tensors.
EncoderOutput encode(const Encoder& enc, const Tensor& obs, const LixContext* lix = nullptr);
/// Conv stack only.
EncoderOutput encode_features(const Encoder& enc, const Tensor& obs, const LixContext* lix = nullptr);
/// Trunk projection of a feature map.
Tensor encode_trunk(const Encoder& enc, const Tensor& features);

/// Fully connected ReLU stack; the last layer is linear.
struct MLP {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters(const std::string& prefix) const;
  std::size_t input_dim() const { return weight.front().dim(1); }
  std::size_t output_dim() const { return weight.back().dim(0); }
};

/// `sizes` lists layer widths including input and output, e.g. {in, 64, 64, 1}.
MLP build_mlp(const std::vector<std::size_t>& sizes, Rng& rng);
Tensor mlp_forward(const MLP& mlp, const Tensor& x);

/// Orthogonal rows x cols matrix (row-major) scaled by `gain`.
std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng);

/// target <- rho * target + (1 - rho) * online, elementwise.
void polyak_update(std::span<Tensor> target, std::span<const Tensor> online, double rho);

/// Deep copies that do not share nodes with the source.
Encoder clone(const Encoder& enc);
MLP clone(const MLP& mlp);

void set_requires_grad(std::span<Tensor> params, bool on);
void zero_grad(std::span<Tensor> params);
void fill_zero(std::span<Tensor> params);

}  // namespace alix
