#pragma once

#include <vector>

#include "alix/tensor.hpp"

namespace alix {

// Differentiable primitives. Binary elementwise ops require equal shapes;
// there is no broadcasting.

/// 2-D cross-correlation with zero padding.
/// input [B,Cin,H,W], kernel [Cout,Cin,kh,kw] -> [B,Cout,H',W'] with
/// H' = (H + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);
/// Same, with a per-output-channel bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// input [B,N], weight [M,N], bias [M] -> [B,M].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// Linear map without bias.
Tensor linear(const Tensor& input, const Tensor& weight);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
Tensor log1p(const Tensor& a);

/// Full reductions to a [1] tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reductions over the listed axes (removed from the result shape; a full
/// reduction yields shape [1]).
Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes);

Tensor reshape(const Tensor& a, Shape shape);
/// [B, ...] -> [B, prod(...)].
Tensor flatten(const Tensor& a);
/// Concatenates rank-2 tensors along axis 1.
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Normalizes each row of a [B,N] tensor to zero mean / unit variance, then
/// applies the affine gain [N] and shift [N].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

/// mean((pred - target)^2).
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Naive nested-loop convolution, kept as an independent reference for tests.
std::vector<double> conv2d_reference(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                     std::size_t padding);

}  // namespace alix
