#include "ehsnet/op_chain.hpp"

#include <algorithm>
#include <stdexcept>

namespace ehsnet {

int OpChain::add_conv(int arg, ConvWeights w) {
  nodes.push_back({ChainNode::Kind::kConv, std::move(w), {arg}});
  return int(nodes.size()) - 1;
}

int OpChain::add_relu(int arg) {
  nodes.push_back({ChainNode::Kind::kRelu, {}, {arg}});
  return int(nodes.size()) - 1;
}

int OpChain::add_concat(std::vector<int> args) {
  nodes.push_back({ChainNode::Kind::kConcat, {}, std::move(args)});
  return int(nodes.size()) - 1;
}

std::vector<NodeDims> chain_dims(const OpChain& chain, int h, int w) {
  if (chain.nodes.empty()) throw std::invalid_argument("chain: empty");
  std::vector<NodeDims> dims(chain.nodes.size());
  auto arg_dims = [&](int a) -> NodeDims {
    if (a == kChainInput) return {chain.in_channels, h, w};
    if (a < 0 || a >= int(dims.size()))
      throw std::invalid_argument("chain: bad node argument");
    return dims[size_t(a)];
  };
  for (size_t i = 0; i < chain.nodes.size(); ++i) {
    const ChainNode& n = chain.nodes[i];
    for (int a : n.args)
      if (a >= int(i) && a != kChainInput)
        throw std::invalid_argument("chain: forward reference in node args");
    switch (n.kind) {
      case ChainNode::Kind::kConv: {
        const NodeDims in = arg_dims(n.args.at(0));
        const ConvWeights& cw = n.conv;
        if (in.c != cw.in_c())
          throw std::invalid_argument(
              "chain conv: input channels " + std::to_string(in.c) +
              " != weight channels " + std::to_string(cw.in_c()));
        if (cw.kh % 2 == 0 || cw.kw % 2 == 0)
          throw std::invalid_argument("chain conv: kernel sizes must be odd");
        if (cw.stride == 1 && cw.padding != (cw.kh - 1) / 2)
          throw std::invalid_argument(
              "chain conv: stride-1 nodes must use same padding");
        dims[i] = {cw.out_c, (in.h + 2 * cw.padding - cw.kh) / cw.stride + 1,
                   (in.w + 2 * cw.padding - cw.kw) / cw.stride + 1};
        if (dims[i].h < 1 || dims[i].w < 1)
          throw std::invalid_argument("chain conv: output collapses to zero");
        break;
      }
      case ChainNode::Kind::kRelu:
        dims[i] = arg_dims(n.args.at(0));
        break;
      case ChainNode::Kind::kConcat: {
        if (n.args.empty())
          throw std::invalid_argument("chain concat: no inputs");
        NodeDims d = arg_dims(n.args[0]);
        int csum = 0;
        for (int a : n.args) {
          const NodeDims ad = arg_dims(a);
          if (ad.h != d.h || ad.w != d.w)
            throw std::invalid_argument(
                "chain concat: spatial mismatch between inputs");
          csum += ad.c;
        }
        dims[i] = {csum, d.h, d.w};
        break;
      }
    }
  }
  return dims;
}

int receptive_field_radius(const OpChain& chain) {
  std::vector<int> margin(chain.nodes.size(), 0);
  auto arg_margin = [&](int a) { return a == kChainInput ? 0 : margin[size_t(a)]; };
  for (size_t i = 0; i < chain.nodes.size(); ++i) {
    const ChainNode& n = chain.nodes[i];
    switch (n.kind) {
      case ChainNode::Kind::kConv:
        if (n.conv.stride != 1)
          throw std::invalid_argument(
              "receptive_field_radius: strided op in chain (stride " +
              std::to_string(n.conv.stride) + ")");
        margin[i] = arg_margin(n.args.at(0)) + (n.conv.kh - 1) / 2;
        break;
      case ChainNode::Kind::kRelu:
        margin[i] = arg_margin(n.args.at(0));
        break;
      case ChainNode::Kind::kConcat: {
        int m = 0;
        for (int a : n.args) m = std::max(m, arg_margin(a));
        margin[i] = m;
        break;
      }
    }
  }
  return margin.empty() ? 0 : margin.back();
}

int receptive_field_radius(const std::vector<ConvWeights>& serial) {
  int rf = 0;
  for (const ConvWeights& w : serial) {
    if (w.stride != 1)
      throw std::invalid_argument(
          "receptive_field_radius: strided op in chain (stride " +
          std::to_string(w.stride) + ")");
    rf += (w.kh - 1) / 2;
  }
  return rf;
}

Tensor chain_eval(const OpChain& chain, const Tensor& input) {
  chain_dims(chain, input.shape.h, input.shape.w);  // validate
  std::vector<Tensor> vals(chain.nodes.size());
  auto arg_val = [&](int a) -> const Tensor& {
    return a == kChainInput ? input : vals[size_t(a)];
  };
  for (size_t i = 0; i < chain.nodes.size(); ++i) {
    const ChainNode& n = chain.nodes[i];
    switch (n.kind) {
      case ChainNode::Kind::kConv:
        vals[i] = conv2d(arg_val(n.args[0]), n.conv);
        break;
      case ChainNode::Kind::kRelu:
        vals[i] = relu(arg_val(n.args[0]));
        break;
      case ChainNode::Kind::kConcat: {
        std::vector<Tensor> parts;
        parts.reserve(n.args.size());
        for (int a : n.args) parts.push_back(arg_val(a));
        vals[i] = concat(parts, 1);
        break;
      }
    }
  }
  return std::move(vals.back());
}

size_t chain_weight_bytes(const OpChain& chain) {
  size_t b = 0;
  for (const ChainNode& n : chain.nodes)
    if (n.kind == ChainNode::Kind::kConv) b += n.conv.param_bytes();
  return b;
}

std::vector<NodeNeed> chain_backward_ranges(const OpChain& chain,
                                            TileRect core) {
  // Index nodes.size() holds the chain-input need.
  std::vector<NodeNeed> needs(chain.nodes.size() + 1);
  auto merge = [&](int a, Interval y, Interval x) {
    NodeNeed& t = needs[a == kChainInput ? chain.nodes.size() : size_t(a)];
    if (!t.used) {
      t.y = y;
      t.x = x;
      t.used = true;
    } else {
      t.y.lo = std::min(t.y.lo, y.lo);
      t.y.hi = std::max(t.y.hi, y.hi);
      t.x.lo = std::min(t.x.lo, x.lo);
      t.x.hi = std::max(t.x.hi, x.hi);
    }
  };
  needs[chain.nodes.size() - 1] = {{core.y0, core.y1}, {core.x0, core.x1}, true};
  for (int i = int(chain.nodes.size()) - 1; i >= 0; --i) {
    const NodeNeed& me = needs[size_t(i)];
    if (!me.used)
      throw std::invalid_argument("chain: node " + std::to_string(i) +
                                  " does not feed the output");
    const ChainNode& n = chain.nodes[size_t(i)];
    switch (n.kind) {
      case ChainNode::Kind::kConv: {
        const int s = n.conv.stride, p = n.conv.padding;
        merge(n.args[0],
              {me.y.lo * s - p, (me.y.hi - 1) * s - p + n.conv.kh},
              {me.x.lo * s - p, (me.x.hi - 1) * s - p + n.conv.kw});
        break;
      }
      case ChainNode::Kind::kRelu:
        merge(n.args[0], me.y, me.x);
        break;
      case ChainNode::Kind::kConcat:
        for (int a : n.args) merge(a, me.y, me.x);
        break;
    }
  }
  return needs;
}

size_t chain_working_set_bytes(const OpChain& chain, int core_h, int core_w) {
  const auto needs = chain_backward_ranges(chain, {0, 0, core_h, core_w});
  // Channel count per node.
  std::vector<int> ch(chain.nodes.size());
  auto arg_c = [&](int a) { return a == kChainInput ? chain.in_channels : ch[size_t(a)]; };
  for (size_t i = 0; i < chain.nodes.size(); ++i) {
    const ChainNode& n = chain.nodes[i];
    if (n.kind == ChainNode::Kind::kConv)
      ch[i] = n.conv.out_c;
    else if (n.kind == ChainNode::Kind::kRelu)
      ch[i] = arg_c(n.args[0]);
    else {
      int s = 0;
      for (int a : n.args) s += arg_c(a);
      ch[i] = s;
    }
  }
  auto node_bytes = [&](int idx) {
    const NodeNeed& nd = needs[idx == kChainInput ? chain.nodes.size() : size_t(idx)];
    const int c = arg_c(idx == kChainInput ? kChainInput : idx);
    return size_t(c) * size_t(nd.y.len()) * size_t(nd.x.len()) * sizeof(float);
  };
  // Consumers per producer; the output node is consumed once more by the
  // copy back to host.
  std::vector<int> refs(chain.nodes.size() + 1, 0);
  auto ref_of = [&](int a) -> int& {
    return refs[a == kChainInput ? chain.nodes.size() : size_t(a)];
  };
  for (const ChainNode& n : chain.nodes)
    for (int a : n.args) ++ref_of(a);
  ++refs[chain.nodes.size() - 1];

  // Same allocation schedule as the executor: stage input, then per node
  // alloc output before releasing exhausted arguments.
  size_t alive = node_bytes(kChainInput);
  size_t peak = alive;
  std::vector<bool> freed(chain.nodes.size() + 1, false);
  for (size_t i = 0; i < chain.nodes.size(); ++i) {
    alive += node_bytes(int(i));
    peak = std::max(peak, alive);
    for (int a : chain.nodes[i].args) {
      int& r = ref_of(a);
      if (--r == 0) {
        const size_t idx = a == kChainInput ? chain.nodes.size() : size_t(a);
        if (!freed[idx]) {
          alive -= node_bytes(a);
          freed[idx] = true;
        }
      }
    }
  }
  return peak;
}

}  // namespace ehsnet
