#pragma once

// Primitive numeric kernels. All functions are pure and deterministic: each
// output element is produced by a fixed-order reduction that does not depend
// on the kernel thread count. Convolutions use the correlation convention
// (no kernel flip). Spatial tensors are [C, H, W]; the batch axis is fixed
// to 1 and omitted.

#include <cstddef>
#include <string_view>

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// Two-operand labeled contraction, e.g. "bmchw,bnmc->bmhwn". Labels shared
// by both operands and absent from the output are summed; labels present in
// one operand only and absent from the output are summed out first.
Tensor contract(const Tensor& a, const Tensor& b, std::string_view spec);

// Max-subtracted softmax along `axis`. The normalizer is summed in ascending
// order of the exponentials, so results are independent of the order of the
// entries along the axis.
Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes over the last axis (population variance), then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
inline Tensor layer_norm(const Tensor& x, const LayerNormParams& p, float eps = 1e-5f) {
    return layer_norm(x, p.gamma, p.beta, eps);
}

enum class Activation { sigmoid, gelu, relu };
Activation parse_activation(std::string_view name);

// gelu uses the tanh approximation 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3))).
Tensor pointwise(Activation act, const Tensor& x);
float sigmoid(float x);
float gelu(float x);

// [M, K] x [K, N] -> [M, N]
Tensor matmul(const Tensor& a, const Tensor& b);
// [N, in] -> [N, out]
Tensor linear(const Tensor& x, const Linear& w);

Tensor conv2d(const Tensor& x, const Conv2d& w);

// Non-overlapping patch convolution: weight [Cout, Cin, k, k], stride k.
Tensor patch_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel);

// Per-row 1-D correlation with "same" zero padding (m-1)/2.
// signals [N, D], kernels [N, m] with m odd -> [N, D].
Tensor depthwise_conv1d(const Tensor& signals, const Tensor& kernels);

// 2x2 kernel, stride 2: x [Cin, H, W], weight [Cin, Cout, 2, 2] -> [Cout, 2H, 2W].
Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Half-pixel-center bilinear resize (align_corners = false), factor in {2, 4, 8}.
Tensor bilinear_upsample(const Tensor& x, std::size_t factor);

Tensor reduce_max(const Tensor& x, std::size_t axis);

// Unit Euclidean norm along `axis`; the norm is clamped below at 1e-12.
Tensor l2_normalize(const Tensor& x, std::size_t axis);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& x);

// Concatenates [C1, H, W] and [C2, H, W] along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace eovseg
