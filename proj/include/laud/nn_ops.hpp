#pragma once

#include <span>
#include <vector>

#include "laud/tensor.hpp"

namespace laud {

/// Learned convolution layer description. `weight` is (out_ch, in_ch, kH, kW)
/// in the Shape slots (b=out_ch, c=in_ch, h=kH, w=kW); `bias` is (1, out_ch,
/// 1, 1). For transposed=true the same weight maps an out_ch-channel input to
/// an in_ch-channel output (the adjoint of the forward convolution).
struct ConvParams {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;
  bool transposed = false;
};

/// Cross-correlation (deep-learning convention) plus per-channel bias.
/// Output spatial size: floor((in + 2*pad - k)/stride) + 1.
Tensor conv2d(const Tensor& input, const ConvParams& params);

/// Transposed convolution: the adjoint of conv2d with the same weight.
/// Output spatial size: (in - 1)*stride - 2*pad + k.
Tensor conv2d_transposed(const Tensor& input, const ConvParams& params);

/// Elementwise max(x, slope*x). slope must lie in (0,1).
Tensor leaky_relu(const Tensor& input, double slope);

/// Concatenate along the channel dimension; all inputs must agree on
/// batch/height/width. Order is preserved and gradients split back.
Tensor concat_channels(std::span<const Tensor> inputs);

/// Elementwise sum of two same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);

/// Multiply by a constant.
Tensor scale(const Tensor& t, double factor);

/// Mean absolute difference over all elements (scalar). The subgradient at
/// exact ties is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Mean squared difference over all elements (scalar).
Tensor l2_loss(const Tensor& pred, const Tensor& target);

}  // namespace laud
