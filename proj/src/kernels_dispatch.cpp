#include "ehsnet/kernels.hpp"

#include <cstdlib>
#include <string>

namespace ehsnet::kern {

bool simd_target_built();  // defined in kernels_simd.cpp

bool simd_supported() {
  if (!simd_target_built()) return false;
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return true;  // NEON is baseline on aarch64
#endif
}

const Kernels& active_kernels() {
  static const Kernels* chosen = [] {
    const char* e = std::getenv("EHSNET_SIMD");
    const std::string v = e ? e : "auto";
    if (v == "scalar") return &scalar_kernels();
    return simd_supported() ? &simd_kernels() : &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace ehsnet::kern
