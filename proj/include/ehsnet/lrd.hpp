#pragma once

#include <cstdint>

#include "ehsnet/op_chain.hpp"
#include "ehsnet/tensor.hpp"
#include "ehsnet/tensor_ops.hpp"

namespace ehsnet {

// Depthwise spatial conv followed by a pointwise 1x1 mix, no activation
// in between.
struct SeparableConv {
  ConvWeights depthwise;
  ConvWeights pointwise;
};

// Long-range dependency block: 1x1 reduce -> relu -> 5x5 conv feeding three
// parallel large-kernel separable convs (7/15/31) -> concat of the reduced
// input with all four branch outputs -> 1x1 fuse -> 1x1 expand.
struct LrdParams {
  int in_c = 0;
  int k = 256;
  int d = 256;
  ConvWeights reduce_1x1;  // in_c -> k
  ConvWeights conv5;       // k -> k, 5x5
  SeparableConv dw7, dw15, dw31;
  ConvWeights fuse_1x1;    // 5k -> k
  ConvWeights expand_1x1;  // k -> d
};

LrdParams lrd_random_params(int in_c, int k, int d, uint64_t seed);
void validate(const LrdParams& p);

// Zeroes a branch's kernels and biases; its output becomes constant and
// stops contributing to the influence footprint.
void zero_branch(SeparableConv& branch);

// LRDU only: input has k channels, output k channels, halo radius 17.
OpChain lrdu_chain(const LrdParams& p);
// Full block: input in_c channels, output d channels, same spatial size.
OpChain lrd_chain(const LrdParams& p);

Tensor lrdu_forward(const Tensor& f_reduced, const LrdParams& p);
Tensor lrd_forward(const Tensor& f_in, const LrdParams& p);

// Measures which input pixels influence the output at one position, by
// repeated forward passes: the base input is perturbed by +1 on every
// channel at a pixel and the max-abs change across output channels at
// probe_xy is recorded.
class InfluenceProbe {
 public:
  InfluenceProbe(const LrdParams& p, int h, int w, int probe_y, int probe_x,
                 uint64_t input_seed);
  float at(int y, int x) const;

 private:
  const LrdParams& params_;
  int probe_y_, probe_x_;
  Tensor base_in_;
  Tensor base_out_;
};

// Full influence map (one entry per input pixel); desk-scale only, h*w
// forward passes.
Tensor influence_probe(const LrdParams& p, int h, int w, int probe_y,
                       int probe_x, uint64_t input_seed);

}  // namespace ehsnet
