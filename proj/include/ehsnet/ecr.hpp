#pragma once

#include <cstdint>

#include "ehsnet/arena.hpp"
#include "ehsnet/tensor.hpp"

namespace ehsnet {

// The hardest (lowest top-2 margin) pixels of a logit map, in canonical
// ascending flat-index order so gather and scatter are deterministic.
struct HardRegion {
  std::vector<int64_t> indices;
  std::vector<float> margins;
};

enum class AttentionMode { kLinear, kSoftmaxNormalized };

// 1x1 projections for attention, stored row-major (d_in x d_attn) and
// applied as rows * W. softmax-normalized mode normalizes keys along the
// spatial axis and queries along the channel axis before the two products.
struct AttentionParams {
  Mat w_q, w_k, w_v;
  AttentionMode mode = AttentionMode::kSoftmaxNormalized;
};

AttentionParams attention_random_params(int d_in, int d_attn,
                                        AttentionMode mode, uint64_t seed);

// Per-pixel difference between the largest and second-largest logit.
Tensor top2_margin(const Tensor& aux_logits);

// The ceil(a% * N) pixels with the smallest margins; ties broken toward the
// lower flat index.
HardRegion select_hard_region(const Tensor& margins, double a_percent);

// Rows of f_hard are the feature vectors at the region's pixels.
Mat gather(const Tensor& f_in, const HardRegion& region);

// Reference attention materializing the full query-key score matrix.
Mat generic_attention(const Tensor& f_in, const Mat& f_hard,
                      const AttentionParams& p);

// Same map computed as Q * (K^T V): the (d_attn x d_attn) context is built
// first, one pixel row at a time, and no |R| x N or N x N matrix ever
// exists. Cost is O((N + |R|) * d_attn^2) plus the projections.
Mat efficient_attention(const Tensor& f_in, const Mat& f_hard,
                        const AttentionParams& p);

// Residual write-back: f_out equals f_in except at region pixels, where the
// matching f_conf row is added.
Tensor scatter(const Mat& f_conf, const HardRegion& region,
               const Tensor& f_in);

// select -> gather -> efficient attention -> scatter.
Tensor ecr_forward(const Tensor& f_in, const Tensor& aux_logits,
                   double a_percent, const AttentionParams& p);

// Streaming variant for features too large to hold device-resident: the
// context accumulation walks row strips staged through the arena. Output is
// bit-identical to ecr_forward on the same data because every accumulation
// visits pixels in the same ascending order regardless of strip size.
HandleId ecr_forward_streamed(HandleId f_in, const Tensor& aux_logits,
                              double a_percent, const AttentionParams& p,
                              DeviceArena& arena);

// Multiplies spent in attention code on this thread (projections included).
uint64_t attention_mul_count();
void reset_attention_mul_count();

}  // namespace ehsnet
