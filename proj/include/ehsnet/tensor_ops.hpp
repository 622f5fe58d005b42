#pragma once

#include <cstdint>
#include <vector>

#include "ehsnet/tensor.hpp"

namespace ehsnet {

// Weights of one 2-D convolution. kernel is (out_channels, in_channels/groups,
// kh, kw) row-major; bias has out_channels entries (zeros when unused).
struct ConvWeights {
  int out_c = 0;
  int in_c_per_group = 0;
  int kh = 0;
  int kw = 0;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  std::vector<float> kernel;
  std::vector<float> bias;

  int in_c() const { return in_c_per_group * groups; }
  size_t param_bytes() const {
    return (kernel.size() + bias.size()) * sizeof(float);
  }
};

enum class InitScheme { kUniformFanIn, kZeros, kOnes };

// Deterministic tensor fill. uniform-fan-in draws U(-b, b) with
// b = 1/sqrt(c*h*w) from the counter PRNG, element i of stream `seed`.
Tensor seeded_init(Shape shape, InitScheme scheme, uint64_t seed);

// Convenience constructor for convolution weights with uniform-fan-in kernel
// and bias (fan_in = in_c_per_group*kh*kw), streams seed and seed+1.
ConvWeights seeded_conv(int out_c, int in_c, int k, int stride, int groups,
                        uint64_t seed);

// Zero-padded convolution. Per output element the accumulation starts at the
// bias and walks kernel positions row-major, then input channels, including
// taps that fall in the zero padding, so tiled execution can reproduce the
// result bit-exactly.
Tensor conv2d(const Tensor& input, const ConvWeights& w);

Tensor relu(const Tensor& input);

// Numerically-stable softmax (max subtraction) along one axis, 0=n 1=c 2=h 3=w.
Tensor softmax(const Tensor& input, int axis);

Tensor concat(const std::vector<Tensor>& inputs, int axis);

// Bilinear resize with half-pixel sampling (align_corners=false):
// src = (dst + 0.5) * in/out - 0.5, taps clamped to the valid range.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

namespace detail {
// Copies `input` into a buffer with `pad` zero rows/cols on each side.
Tensor pad_zero(const Tensor& input, int pad);
// Valid-mode convolution on contiguous tensors (used by conv2d and as the
// per-tile compute path; both run the same kernel table).
Tensor conv2d_valid(const Tensor& input, const ConvWeights& w);
}  // namespace detail

}  // namespace ehsnet
