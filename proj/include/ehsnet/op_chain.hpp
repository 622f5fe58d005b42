#pragma once

#include <vector>

#include "ehsnet/tensor.hpp"
#include "ehsnet/tensor_ops.hpp"

namespace ehsnet {

// A small SSA-style operator graph over planar tensors: convolutions,
// activations and channel concat. Node arguments refer to earlier nodes by
// index; kChainInput refers to the graph input. The last node is the output.
// This is the unit of tiled execution.
inline constexpr int kChainInput = -1;

struct ChainNode {
  enum class Kind { kConv, kRelu, kConcat };
  Kind kind = Kind::kRelu;
  ConvWeights conv;       // kConv only
  std::vector<int> args;  // producer node ids or kChainInput
};

struct OpChain {
  int in_channels = 0;
  std::vector<ChainNode> nodes;

  int out_node() const { return int(nodes.size()) - 1; }
  int add_conv(int arg, ConvWeights w);
  int add_relu(int arg);
  int add_concat(std::vector<int> args);
};

struct NodeDims {
  int c = 0, h = 0, w = 0;
};

// Output dims per node for a given input size; validates channel counts,
// concat spatial agreement and same-padding of stride-1 convolutions.
std::vector<NodeDims> chain_dims(const OpChain& chain, int h, int w);

// Σ (k_i-1)/2 along the deepest path; the halo width a tile needs so its
// core matches monolithic execution. Rejects chains containing strided ops.
int receptive_field_radius(const OpChain& chain);
int receptive_field_radius(const std::vector<ConvWeights>& serial);

// Monolithic evaluation via the public tensor ops.
Tensor chain_eval(const OpChain& chain, const Tensor& input);

size_t chain_weight_bytes(const OpChain& chain);

// Half-open interval on one image axis; may extend beyond the image, the
// outside part reads as zeros (same-padding semantics).
struct Interval {
  int64_t lo = 0, hi = 0;
  int64_t len() const { return hi - lo; }
};

struct NodeNeed {
  Interval y, x;
  bool used = false;
};

struct TileRect {
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  int h() const { return y1 - y0; }
  int w() const { return x1 - x0; }
};

// Needed output window per node (and for the chain input, returned last) to
// produce `core` on the output node's grid.
std::vector<NodeNeed> chain_backward_ranges(const OpChain& chain,
                                            TileRect core);

// Peak bytes of live node buffers (input staging included, weights excluded)
// when executing one tile with the given core extent.
size_t chain_working_set_bytes(const OpChain& chain, int core_h, int core_w);

}  // namespace ehsnet
