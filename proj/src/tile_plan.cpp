#include "ehsnet/tile_plan.hpp"

#include <algorithm>

namespace ehsnet {

TilePlan plan_tiles_model(int grid_h, int grid_w, int rf,
                          const WorkingSetModel& ws, size_t budget) {
  if (grid_h < 1 || grid_w < 1)
    throw std::invalid_argument("plan_tiles: empty grid");
  auto clipped_ws = [&](int s) {
    return ws(std::min(s, grid_h), std::min(s, grid_w));
  };
  const size_t min_bytes = clipped_ws(1);
  if (min_bytes > budget)
    throw TilingError(
        "arena budget " + std::to_string(budget) +
            " bytes is below the minimal feasible budget of " +
            std::to_string(min_bytes) + " bytes for this operator chain",
        min_bytes);
  // Largest square core that fits; ws grows monotonically with the core.
  int lo = 1, hi = std::max(grid_h, grid_w);
  while (lo < hi) {
    const int mid = lo + (hi - lo + 1) / 2;
    if (clipped_ws(mid) <= budget)
      lo = mid;
    else
      hi = mid - 1;
  }
  TilePlan plan;
  plan.grid_h = grid_h;
  plan.grid_w = grid_w;
  plan.rf = rf;
  plan.core_h = std::min(lo, grid_h);
  plan.core_w = std::min(lo, grid_w);
  plan.working_set_bytes = ws(plan.core_h, plan.core_w);
  for (int y = 0; y < grid_h; y += plan.core_h)
    for (int x = 0; x < grid_w; x += plan.core_w)
      plan.tiles.push_back({y, x, std::min(y + plan.core_h, grid_h),
                            std::min(x + plan.core_w, grid_w)});
  return plan;
}

TilePlan plan_tiles(int h, int w, int rf, int channels, size_t budget) {
  if (rf < 0) throw std::invalid_argument("plan_tiles: negative halo");
  auto ws = [rf, channels](int ch, int cw) {
    const size_t in_tile =
        size_t(ch + 2 * rf) * size_t(cw + 2 * rf) * size_t(channels);
    const size_t out_tile = size_t(ch) * size_t(cw) * size_t(channels);
    return (in_tile + out_tile) * sizeof(float);
  };
  return plan_tiles_model(h, w, rf, ws, budget);
}

TilePlan plan_for_chain(const OpChain& chain, int in_h, int in_w,
                        size_t budget) {
  const auto dims = chain_dims(chain, in_h, in_w);
  const NodeDims out = dims.back();
  const size_t wbytes = chain_weight_bytes(chain);
  auto ws = [&chain, wbytes](int ch, int cw) {
    return chain_working_set_bytes(chain, ch, cw) + wbytes;
  };
  bool stride1 = true;
  for (const ChainNode& n : chain.nodes)
    if (n.kind == ChainNode::Kind::kConv && n.conv.stride != 1) stride1 = false;
  const int rf = stride1 ? receptive_field_radius(chain) : -1;
  return plan_tiles_model(out.h, out.w, rf, ws, budget);
}

}  // namespace ehsnet
