#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "alix/rng.hpp"
#include "alix/tensor.hpp"

namespace alix {

/// How shift draws are shared across a feature map.
enum class ShiftGranularity {
  per_location,  // one (dx, dy) per batch element and spatial location
  per_image,     // one (dx, dy) per batch element, broadcast over locations
};

/// Continuous shifts for a [B, C, H, W] feature map, shared across channels.
/// `dx` displaces the row coordinate and `dy` the column coordinate, both
/// stored row-major as [B, H, W] with |dx|, |dy| <= radius.
struct ShiftField {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double radius = 0.0;
  std::vector<double> dx;
  std::vector<double> dy;

  static ShiftField zeros(std::size_t batch, std::size_t height, std::size_t width);
  std::size_t index(std::size_t b, std::size_t i, std::size_t j) const { return (b * height + i) * width + j; }
};

/// Bilinear stencil of one sample point: the four neighbours in the order
/// (floor,floor), (floor,ceil), (ceil,floor), (ceil,ceil) with their weights.
struct MixWeights {
  std::array<double, 4> weight{};
  std::array<std::size_t, 4> row{};
  std::array<std::size_t, 4> col{};
};

/// Stencil for sampling an H x W grid at (row, col). Coordinates are clamped
/// to [0, H-1] x [0, W-1]; the upper neighbour is floor + 1 (clamped), so an
/// integral coordinate puts weight 1 on a single cell.
MixWeights mix_weights(double row, double col, std::size_t height, std::size_t width);

/// Clamped bilinear sample of a single H x W map.
double bilinear_sample(const double* map, std::size_t height, std::size_t width, double row, double col);

/// Draws i.i.d. U[-S, S] shifts. Each batch element uses its own substream
/// split from one draw of `rng`, so the field does not depend on traversal
/// order. S = 0 yields an all-zero field.
ShiftField sample_shift_field(std::size_t batch, std::size_t height, std::size_t width, double radius, Rng& rng,
                              ShiftGranularity granularity = ShiftGranularity::per_location);

/// Raw LIX kernels on [B, C, H, W] row-major buffers. `lix_backward` is the
/// exact transpose of `lix_forward` for the same shifts.
std::vector<double> lix_forward(std::span<const double> z, const Shape& shape, const ShiftField& shifts);
std::vector<double> lix_backward(std::span<const double> grad_out, const Shape& shape, const ShiftField& shifts);

/// Differentiable LIX layer: each output is the bilinear interpolation of its
/// own feature map at the shifted coordinate (i + dx, j + dy).
Tensor lix_forward(const Tensor& z, const ShiftField& shifts);
/// Scatters each output gradient to its four neighbours (non-differentiable).
Tensor lix_backward(const Tensor& grad_out, const ShiftField& shifts);

/// Pad-and-crop augmentation: replicate-pad by `pad`, then crop back to
/// H x W at offsets drawn uniformly from [0, 2*pad], one pair per image.
Tensor random_shift_aug(const Tensor& images, std::size_t pad, Rng& rng);

/// Deterministic core of `random_shift_aug`; offsets are (row, col) crop
/// origins in the padded frame, one per batch element.
Tensor shift_crop(const Tensor& images, std::size_t pad, std::span<const std::pair<std::size_t, std::size_t>> offsets);

}  // namespace alix
