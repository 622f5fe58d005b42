#include "ehsnet/execute_tiled.hpp"

#include <algorithm>
#include <cstring>

#include "ehsnet/kernels.hpp"

namespace ehsnet {
namespace {

// Copies the in-image part of a needed window from a full-grid tensor into a
// zero-filled tile buffer; rows outside the image stay zero, which is
// exactly the same-padding convention of monolithic execution.
void stage_window(const Tensor& src, const NodeNeed& need, Tensor& dst) {
  const int h = src.shape.h, w = src.shape.w;
  const int64_t y0 = std::max<int64_t>(need.y.lo, 0);
  const int64_t y1 = std::min<int64_t>(need.y.hi, h);
  const int64_t x0 = std::max<int64_t>(need.x.lo, 0);
  const int64_t x1 = std::min<int64_t>(need.x.hi, w);
  if (y0 >= y1 || x0 >= x1) return;
  const size_t cols = size_t(x1 - x0);
  for (int c = 0; c < src.shape.c; ++c) {
    const float* sp = src.plane(0, c);
    float* dp = dst.plane(0, c);
    for (int64_t y = y0; y < y1; ++y)
      std::memcpy(dp + (y - need.y.lo) * dst.shape.w + (x0 - need.x.lo),
                  sp + y * w + x0, cols * sizeof(float));
  }
}

// Copies the destination window (a sub-window of the source buffer) between
// tile buffers, into channel offset dst_c0.
void copy_between(const Tensor& src, const NodeNeed& sneed, Tensor& dst,
                  const NodeNeed& dneed, int dst_c0) {
  const int64_t rows = dneed.y.len();
  const size_t cols = size_t(dneed.x.len());
  const int64_t yoff = dneed.y.lo - sneed.y.lo;
  const int64_t xoff = dneed.x.lo - sneed.x.lo;
  for (int c = 0; c < src.shape.c; ++c) {
    const float* sp = src.plane(0, c);
    float* dp = dst.plane(0, dst_c0 + c);
    for (int64_t y = 0; y < rows; ++y)
      std::memcpy(dp + y * dst.shape.w,
                  sp + (y + yoff) * src.shape.w + xoff, cols * sizeof(float));
  }
}

}  // namespace

HandleId execute_tiled(const OpChain& chain, HandleId input,
                       const TilePlan& plan, DeviceArena& arena) {
  const Tensor& in = arena.peek(input);
  if (in.shape.n != 1)
    throw std::invalid_argument("execute_tiled: batch size must be 1, got " +
                                in.shape.str());
  if (in.shape.c != chain.in_channels)
    throw std::invalid_argument("execute_tiled: input " + in.shape.str() +
                                " does not match chain input channels " +
                                std::to_string(chain.in_channels));
  const auto dims = chain_dims(chain, in.shape.h, in.shape.w);
  const NodeDims out = dims.back();
  if (plan.grid_h != out.h || plan.grid_w != out.w)
    throw std::invalid_argument(
        "execute_tiled: plan grid " + std::to_string(plan.grid_h) + "x" +
        std::to_string(plan.grid_w) + " does not match chain output " +
        std::to_string(out.h) + "x" + std::to_string(out.w));
  if (plan.working_set_bytes > arena.budget())
    throw std::invalid_argument("execute_tiled: plan working set " +
                                std::to_string(plan.working_set_bytes) +
                                " exceeds arena budget " +
                                std::to_string(arena.budget()));

  const HandleId out_handle =
      arena.register_tensor(Tensor({1, out.c, out.h, out.w}));
  const HandleId weights =
      arena.alloc_device_bytes(chain_weight_bytes(chain), /*pinned=*/true);

  const auto& kt = kern::active_kernels();
  const size_t nin = chain.nodes.size();  // slot of the chain input
  auto slot = [&](int a) { return a == kChainInput ? nin : size_t(a); };

  for (const TileRect& core : plan.tiles) {
    const auto needs = chain_backward_ranges(chain, core);
    std::vector<int> refs(nin + 1, 0);
    for (const ChainNode& n : chain.nodes)
      for (int a : n.args) ++refs[slot(a)];
    ++refs[nin - 1];  // final copy back to host

    std::vector<HandleId> buf(nin + 1, 0);
    buf[nin] = arena.alloc_device(
        {1, chain.in_channels, int(needs[nin].y.len()), int(needs[nin].x.len())},
        /*pinned=*/true);
    stage_window(in, needs[nin], arena.data(buf[nin]));
    arena.note_swap_in();

    for (size_t i = 0; i < chain.nodes.size(); ++i) {
      const ChainNode& nd = chain.nodes[i];
      const NodeNeed& my = needs[i];
      buf[i] = arena.alloc_device(
          {1, dims[i].c, int(my.y.len()), int(my.x.len())}, /*pinned=*/true);
      Tensor& ob = arena.data(buf[i]);
      switch (nd.kind) {
        case ChainNode::Kind::kConv: {
          const size_t ai = slot(nd.args[0]);
          const NodeNeed& an = needs[ai];
          const Tensor& ib = arena.peek(buf[ai]);
          // Only rows/cols that exist on this node's full grid are computed;
          // the rest of the buffer stays zero (virtual padding).
          const int64_t oy0 = std::max<int64_t>(my.y.lo, 0);
          const int64_t oy1 = std::min<int64_t>(my.y.hi, dims[i].h);
          const int64_t ox0 = std::max<int64_t>(my.x.lo, 0);
          const int64_t ox1 = std::min<int64_t>(my.x.hi, dims[i].w);
          if (oy0 < oy1 && ox0 < ox1) {
            kern::ConvGeom g;
            g.in_c = ib.shape.c;
            g.in_rstride = ib.shape.w;
            g.in_cstride = int64_t(ib.shape.h) * ib.shape.w;
            g.out_c = nd.conv.out_c;
            g.out_h = int(oy1 - oy0);
            g.out_w = int(ox1 - ox0);
            g.out_rstride = ob.shape.w;
            g.out_cstride = int64_t(ob.shape.h) * ob.shape.w;
            g.kh = nd.conv.kh;
            g.kw = nd.conv.kw;
            g.stride = nd.conv.stride;
            g.groups = nd.conv.groups;
            const int s = nd.conv.stride, p = nd.conv.padding;
            const float* ip = ib.data.data() +
                              (oy0 * s - p - an.y.lo) * g.in_rstride +
                              (ox0 * s - p - an.x.lo);
            float* op = ob.data.data() + (oy0 - my.y.lo) * g.out_rstride +
                        (ox0 - my.x.lo);
            kt.conv_valid(ip, nd.conv.kernel.data(), nd.conv.bias.data(), op, g);
          }
          break;
        }
        case ChainNode::Kind::kRelu: {
          const size_t ai = slot(nd.args[0]);
          copy_between(arena.peek(buf[ai]), needs[ai], ob, my, 0);
          kt.relu(ob.data.data(), ob.data.size());
          break;
        }
        case ChainNode::Kind::kConcat: {
          int c0 = 0;
          for (int a : nd.args) {
            const size_t ai = slot(a);
            const Tensor& ib = arena.peek(buf[ai]);
            copy_between(ib, needs[ai], ob, my, c0);
            c0 += ib.shape.c;
          }
          break;
        }
      }
      for (int a : nd.args) {
        const size_t ai = slot(a);
        if (--refs[ai] == 0 && buf[ai] != 0) {
          arena.release(buf[ai]);
          buf[ai] = 0;
        }
      }
    }

    // The output node's window is exactly the core rect; flush it home.
    {
      Tensor& host_out = arena.data(out_handle);
      const Tensor& ob = arena.peek(buf[nin - 1]);
      const size_t cols = size_t(core.w());
      for (int c = 0; c < out.c; ++c) {
        const float* sp = ob.plane(0, c);
        float* dp = host_out.plane(0, c);
        for (int y = core.y0; y < core.y1; ++y)
          std::memcpy(dp + int64_t(y) * out.w + core.x0,
                      sp + int64_t(y - core.y0) * ob.shape.w,
                      cols * sizeof(float));
      }
      arena.note_swap_out();
      if (--refs[nin - 1] == 0) arena.release(buf[nin - 1]);
    }
    ++arena.stats().tiles_executed;
  }
  arena.release(weights);
  return out_handle;
}

}  // namespace ehsnet
