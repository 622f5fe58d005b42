#include "ehsnet/arena.hpp"

#include <limits>
#include <sstream>

namespace ehsnet {

DeviceArena::Entry& DeviceArena::entry(HandleId h) {
  auto it = entries_.find(h);
  if (it == entries_.end())
    throw std::invalid_argument("arena: unknown handle " + std::to_string(h));
  return it->second;
}

const DeviceArena::Entry& DeviceArena::entry(HandleId h) const {
  auto it = entries_.find(h);
  if (it == entries_.end())
    throw std::invalid_argument("arena: unknown handle " + std::to_string(h));
  return it->second;
}

void DeviceArena::check_invariant() const {
  if (resident_bytes_ > budget_)
    throw std::logic_error("arena: resident bytes " +
                           std::to_string(resident_bytes_) +
                           " exceed budget " + std::to_string(budget_));
}

void DeviceArena::add_resident(size_t bytes) {
  resident_bytes_ += bytes;
  stats_.peak_resident = std::max(stats_.peak_resident, resident_bytes_);
  check_invariant();
}

void DeviceArena::make_room(size_t need) {
  if (need > budget_)
    throw std::logic_error("arena: allocation of " + std::to_string(need) +
                           " bytes cannot fit budget " +
                           std::to_string(budget_));
  while (resident_bytes_ + need > budget_) {
    // LRU victim among unpinned device tensors.
    HandleId victim = 0;
    uint64_t best = std::numeric_limits<uint64_t>::max();
    for (const auto& [id, e] : entries_)
      if (e.res == Residency::kDevice && !e.pinned && e.tick < best) {
        best = e.tick;
        victim = id;
      }
    if (victim == 0)
      throw std::logic_error(
          "arena: budget exhausted with no evictable tensor (need " +
          std::to_string(need) + " bytes, resident " +
          std::to_string(resident_bytes_) + ", budget " +
          std::to_string(budget_) + ")");
    to_host(victim);
  }
}

HandleId DeviceArena::register_tensor(Tensor t) {
  const HandleId id = next_id_++;
  Entry e;
  e.tensor = std::move(t);
  e.res = Residency::kHost;
  entries_.emplace(id, std::move(e));
  return id;
}

HandleId DeviceArena::alloc_device(Shape shape, bool pinned) {
  make_room(shape.bytes());
  const HandleId id = next_id_++;
  Entry e;
  e.tensor = Tensor(shape);
  e.res = Residency::kDevice;
  e.pinned = pinned;
  e.tick = ++tick_;
  entries_.emplace(id, std::move(e));
  add_resident(shape.bytes());
  return id;
}

HandleId DeviceArena::alloc_device_bytes(size_t bytes, bool pinned) {
  const int64_t floats = int64_t((bytes + sizeof(float) - 1) / sizeof(float));
  return alloc_device(Shape{1, 1, 1, int(floats)}, pinned);
}

void DeviceArena::to_device(HandleId h) {
  Entry& e = entry(h);
  if (e.res == Residency::kDevice) {
    e.tick = ++tick_;
    return;
  }
  make_room(e.tensor.bytes());
  e.res = Residency::kDevice;
  e.tick = ++tick_;
  ++stats_.swap_in;
  add_resident(e.tensor.bytes());
}

void DeviceArena::to_host(HandleId h) {
  Entry& e = entry(h);
  if (e.res == Residency::kHost) return;
  e.res = Residency::kHost;
  resident_bytes_ -= e.tensor.bytes();
  ++stats_.swap_out;
  check_invariant();
}

void DeviceArena::pin(HandleId h) { entry(h).pinned = true; }
void DeviceArena::unpin(HandleId h) { entry(h).pinned = false; }

void DeviceArena::release(HandleId h) {
  Entry& e = entry(h);
  if (e.res == Residency::kDevice) resident_bytes_ -= e.tensor.bytes();
  entries_.erase(h);
  check_invariant();
}

Tensor& DeviceArena::data(HandleId h) {
  Entry& e = entry(h);
  if (e.res == Residency::kDevice) e.tick = ++tick_;
  return e.tensor;
}

const Tensor& DeviceArena::peek(HandleId h) const { return entry(h).tensor; }

Residency DeviceArena::residency(HandleId h) const { return entry(h).res; }
bool DeviceArena::pinned(HandleId h) const { return entry(h).pinned; }

MemoryStats stats(const DeviceArena& arena) { return arena.stats(); }

std::string stats_json(const MemoryStats& s) {
  std::ostringstream os;
  os << "{\"peak_resident_bytes\":" << s.peak_resident
     << ",\"swap_in\":" << s.swap_in << ",\"swap_out\":" << s.swap_out
     << ",\"tiles\":" << s.tiles_executed << ",\"wall_seconds\":" << s.wall_seconds
     << "}";
  return os.str();
}

}  // namespace ehsnet
