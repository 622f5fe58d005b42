#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>

#include "ehsnet/tensor.hpp"

namespace ehsnet {

using HandleId = uint64_t;

enum class Residency { kHost, kDevice };

struct MemoryStats {
  size_t peak_resident = 0;  // bytes
  uint64_t swap_in = 0;      // host -> device transfers
  uint64_t swap_out = 0;     // device -> host transfers
  uint64_t tiles_executed = 0;
  double wall_seconds = 0.0;
};

// Byte-budgeted simulated device memory with an unbounded host backing
// store. Tensors are owned by the arena and addressed by handle; only
// device-resident bytes count against the budget. Eviction is LRU over
// unpinned device tensors. The residency sum never exceeds the budget
// between public calls; exceeding it is a defect and throws logic_error.
class DeviceArena {
 public:
  explicit DeviceArena(size_t budget_bytes) : budget_(budget_bytes) {}

  // Stores a tensor in the host backing store.
  HandleId register_tensor(Tensor t);
  // Creates a zero-filled device-resident tensor, evicting as needed.
  HandleId alloc_device(Shape shape, bool pinned = false);
  // Same, for raw byte scratch (rounded up to whole floats).
  HandleId alloc_device_bytes(size_t bytes, bool pinned = false);

  void to_device(HandleId h);  // counts one swap-in when host-resident
  void to_host(HandleId h);    // counts one swap-out when device-resident
  void pin(HandleId h);
  void unpin(HandleId h);
  void release(HandleId h);

  Tensor& data(HandleId h);  // bumps LRU recency for device tensors
  const Tensor& peek(HandleId h) const;
  Residency residency(HandleId h) const;
  bool pinned(HandleId h) const;

  size_t budget() const { return budget_; }
  size_t resident_bytes() const { return resident_bytes_; }

  // Transfer accounting for staged tile copies done outside to_device/to_host.
  void note_swap_in() { ++stats_.swap_in; }
  void note_swap_out() { ++stats_.swap_out; }

  MemoryStats& stats() { return stats_; }
  const MemoryStats& stats() const { return stats_; }

 private:
  struct Entry {
    Tensor tensor;
    Residency res = Residency::kHost;
    bool pinned = false;
    uint64_t tick = 0;
  };

  Entry& entry(HandleId h);
  const Entry& entry(HandleId h) const;
  void make_room(size_t need);
  void add_resident(size_t bytes);
  void check_invariant() const;

  size_t budget_;
  size_t resident_bytes_ = 0;
  uint64_t next_id_ = 1;
  uint64_t tick_ = 0;
  std::map<HandleId, Entry> entries_;
  MemoryStats stats_;
};

MemoryStats stats(const DeviceArena& arena);

// JSON object with keys peak_resident_bytes, swap_in, swap_out, tiles,
// wall_seconds.
std::string stats_json(const MemoryStats& s);

}  // namespace ehsnet
