#pragma once

#include "ehsnet/arena.hpp"
#include "ehsnet/op_chain.hpp"
#include "ehsnet/tile_plan.hpp"

namespace ehsnet {

// Executes the chain tile-by-tile over a host-resident input, staging each
// tile's working set in the arena. Output values are bit-identical to
// chain_eval on the whole input: halos carry the exact neighbor data (or the
// zero padding at image borders) and every kernel accumulates in the same
// per-pixel order. The plan must have been built for this chain and an
// arena with at least plan.working_set_bytes of budget.
HandleId execute_tiled(const OpChain& chain, HandleId input,
                       const TilePlan& plan, DeviceArena& arena);

}  // namespace ehsnet
