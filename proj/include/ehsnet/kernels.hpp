#pragma once

#include <cstddef>
#include <cstdint>

namespace ehsnet::kern {

// Geometry for a valid-mode (no implicit padding) strided grouped
// convolution over planar float32 data. Row/channel strides are decoupled
// from the logical extents so the same kernel can write a sub-window of a
// larger buffer.
struct ConvGeom {
  int in_c = 0;  // total input channels
  int in_rstride = 0;   // floats between input rows
  int64_t in_cstride = 0;  // floats between input channel planes
  int out_c = 0;
  int out_h = 0;
  int out_w = 0;
  int out_rstride = 0;
  int64_t out_cstride = 0;
  int kh = 0;
  int kw = 0;
  int stride = 1;
  int groups = 1;
};

// A table of the arithmetic inner loops. Two implementations exist: a scalar
// reference and a SIMD variant built for the host's vector ISA. Both follow
// the same per-output-element accumulation contract so their results are
// bit-identical:
//
//   conv_valid:  acc = bias[oc]; then for ky, kx in kernel row-major order,
//                then ic ascending within the group: acc += in * w.
//                Weights are (oc, in_c/groups, kh, kw) row-major.
//   gemm_acc:    c[m][n] starts from its existing value and accumulates
//                a[m][k]*b[k][n] in ascending k order.
//   outer_acc:   g[i][j] += kr[i] * vr[j].
//
// No fused multiply-add: each multiply and add is a separately rounded
// IEEE-754 binary32 operation in every implementation.
struct Kernels {
  const char* name;
  void (*conv_valid)(const float* in, const float* w, const float* bias,
                     float* out, const ConvGeom& g);
  void (*relu)(float* data, size_t n);
  void (*gemm_acc)(float* c, const float* a, const float* b, int m, int k,
                   int n);
  void (*outer_acc)(float* g, const float* kr, const float* vr, int dk,
                    int dv);
  void (*colwise_max)(float* acc, const float* row, int n);
  void (*colwise_add)(float* acc, const float* row, int n);
  void (*add_inplace)(float* dst, const float* src, size_t n);
};

const Kernels& scalar_kernels();
const Kernels& simd_kernels();  // falls back to the scalar table if the
                                // build has no SIMD target
// True when the running CPU can execute the SIMD table.
bool simd_supported();

// Table used by all operations. Honors EHSNET_SIMD={auto,scalar,simd},
// read once on first use; default auto.
const Kernels& active_kernels();

}  // namespace ehsnet::kern
