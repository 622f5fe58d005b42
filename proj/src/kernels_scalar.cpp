#include "ehsnet/kernels.hpp"

#include <algorithm>

// Reference kernels. Every loop nest here defines the accumulation order the
// SIMD variants must reproduce bit-for-bit.

namespace ehsnet::kern {
namespace {

void conv_valid_scalar(const float* in, const float* w, const float* bias,
                       float* out, const ConvGeom& g) {
  const int cpg = g.in_c / g.groups;
  const int opg = g.out_c / g.groups;
  const int64_t wock = int64_t(cpg) * g.kh * g.kw;  // weight floats per oc
  for (int oc = 0; oc < g.out_c; ++oc) {
    const int grp = oc / opg;
    const float* wc = w + oc * wock;
    const float* ing = in + int64_t(grp) * cpg * g.in_cstride;
    float* outc = out + oc * g.out_cstride;
    for (int oy = 0; oy < g.out_h; ++oy) {
      float* orow = outc + int64_t(oy) * g.out_rstride;
      const int iy0 = oy * g.stride;
      for (int ox = 0; ox < g.out_w; ++ox) {
        const int ix0 = ox * g.stride;
        float acc = bias[oc];
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int kx = 0; kx < g.kw; ++kx) {
            const float* ipix = ing + int64_t(iy0 + ky) * g.in_rstride + ix0 + kx;
            const float* wk = wc + (ky * g.kw + kx);
            for (int ic = 0; ic < cpg; ++ic) {
              acc += ipix[ic * g.in_cstride] * wk[int64_t(ic) * g.kh * g.kw];
            }
          }
        }
        orow[ox] = acc;
      }
    }
  }
}

void relu_scalar(float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) data[i] = std::max(0.0f, data[i]);
}

void gemm_acc_scalar(float* c, const float* a, const float* b, int m, int k,
                     int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + int64_t(i) * n;
    const float* arow = a + int64_t(i) * k;
    for (int j = 0; j < n; ++j) {
      float acc = crow[j];
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * b[int64_t(kk) * n + j];
      crow[j] = acc;
    }
  }
}

void outer_acc_scalar(float* g, const float* kr, const float* vr, int dk,
                      int dv) {
  for (int i = 0; i < dk; ++i) {
    float* grow = g + int64_t(i) * dv;
    const float ki = kr[i];
    for (int j = 0; j < dv; ++j) grow[j] += ki * vr[j];
  }
}

void colwise_max_scalar(float* acc, const float* row, int n) {
  for (int j = 0; j < n; ++j) acc[j] = std::max(acc[j], row[j]);
}

void colwise_add_scalar(float* acc, const float* row, int n) {
  for (int j = 0; j < n; ++j) acc[j] += row[j];
}

void add_inplace_scalar(float* dst, const float* src, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      "scalar",          conv_valid_scalar, relu_scalar,      gemm_acc_scalar,
      outer_acc_scalar,  colwise_max_scalar, colwise_add_scalar,
      add_inplace_scalar,
  };
  return k;
}

}  // namespace ehsnet::kern
