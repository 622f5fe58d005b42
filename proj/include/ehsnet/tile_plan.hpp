#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "ehsnet/op_chain.hpp"

namespace ehsnet {

// Raised when no tile size fits the arena budget; carries the smallest
// budget that would work (a 1x1 core with full halos and weights).
struct TilingError : std::runtime_error {
  size_t min_feasible_bytes;
  TilingError(const std::string& msg, size_t min_bytes)
      : std::runtime_error(msg), min_feasible_bytes(min_bytes) {}
};

// A partition of an output grid into disjoint covering core rectangles,
// row-major, with the halo width the producing chain needs.
struct TilePlan {
  int grid_h = 0, grid_w = 0;  // grid the cores partition
  int core_h = 0, core_w = 0;  // nominal core extent (edge tiles are smaller)
  int rf = 0;                  // halo width; -1 when the chain is strided
  std::vector<TileRect> tiles;
  size_t working_set_bytes = 0;  // worst-case per-tile bytes, weights included
};

using WorkingSetModel = std::function<size_t(int core_h, int core_w)>;

// Generic planner: picks the largest square-ish core whose working set fits
// the budget.
TilePlan plan_tiles_model(int grid_h, int grid_w, int rf,
                          const WorkingSetModel& ws, size_t budget);

// Stride-1 convenience model: working set = haloed input tile + output tile
// at the given channel width.
TilePlan plan_tiles(int h, int w, int rf, int channels, size_t budget);

// Chain-aware planner on the chain's output grid; the working-set model is
// the exact executor allocation schedule plus resident weights.
TilePlan plan_for_chain(const OpChain& chain, int in_h, int in_w,
                        size_t budget);

}  // namespace ehsnet
