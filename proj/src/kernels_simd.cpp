#include "ehsnet/kernels.hpp"

// Vector variants of the inner loops, written against std::experimental::simd
// so one source serves AVX2 (x86_64, this TU is built with -mavx2) and NEON
// (aarch64 baseline). Lanes always run across independent output elements and
// accumulate in exactly the reference order, so results match the scalar
// kernels bit-for-bit; there is no fused multiply-add on any path.

#if defined(__AVX2__) || defined(__ARM_NEON) || defined(__aarch64__)
#define EHSNET_SIMD_TARGET 1
#endif

#ifdef EHSNET_SIMD_TARGET

#include <experimental/simd>

#include <algorithm>
#include <vector>

namespace stdx = std::experimental;

namespace ehsnet::kern {
namespace {

using vfloat = stdx::native_simd<float>;
constexpr int kV = int(vfloat::size());

inline vfloat vload(const float* p) { return vfloat(p, stdx::element_aligned); }
inline void vstore(float* p, vfloat v) { v.copy_to(p, stdx::element_aligned); }

// stride-1 pointwise conv: lanes over ox, 4-way unroll over oc so each input
// block is loaded once per four output channels.
void conv1x1_s1(const float* in, const float* w, const float* bias, float* out,
                const ConvGeom& g) {
  const int cpg = g.in_c / g.groups;
  const int opg = g.out_c / g.groups;
  for (int oc0 = 0; oc0 < g.out_c;) {
    const int grp = oc0 / opg;
    const int ocu = std::min({4, g.out_c - oc0, (grp + 1) * opg - oc0});
    const float* ing = in + int64_t(grp) * cpg * g.in_cstride;
    for (int oy = 0; oy < g.out_h; ++oy) {
      const float* irow = ing + int64_t(oy) * g.in_rstride;
      int ox = 0;
      for (; ox + kV <= g.out_w; ox += kV) {
        vfloat acc[4];
        for (int u = 0; u < ocu; ++u) acc[u] = vfloat(bias[oc0 + u]);
        for (int ic = 0; ic < cpg; ++ic) {
          const vfloat iv = vload(irow + ic * g.in_cstride + ox);
          for (int u = 0; u < ocu; ++u)
            acc[u] += vfloat(w[int64_t(oc0 + u) * cpg + ic]) * iv;
        }
        for (int u = 0; u < ocu; ++u)
          vstore(out + (oc0 + u) * g.out_cstride + int64_t(oy) * g.out_rstride + ox,
                 acc[u]);
      }
      for (; ox < g.out_w; ++ox) {
        for (int u = 0; u < ocu; ++u) {
          float acc = bias[oc0 + u];
          for (int ic = 0; ic < cpg; ++ic)
            acc += irow[ic * g.in_cstride + ox] * w[int64_t(oc0 + u) * cpg + ic];
          out[(oc0 + u) * g.out_cstride + int64_t(oy) * g.out_rstride + ox] = acc;
        }
      }
    }
    oc0 += ocu;
  }
}

// depthwise stride-1: lanes over ox, scalar taps broadcast.
void conv_dw_s1(const float* in, const float* w, const float* bias, float* out,
                const ConvGeom& g) {
  for (int c = 0; c < g.out_c; ++c) {
    const float* inc = in + int64_t(c) * g.in_cstride;
    const float* wc = w + int64_t(c) * g.kh * g.kw;
    float* outc = out + int64_t(c) * g.out_cstride;
    for (int oy = 0; oy < g.out_h; ++oy) {
      float* orow = outc + int64_t(oy) * g.out_rstride;
      int ox = 0;
      for (; ox + kV <= g.out_w; ox += kV) {
        vfloat acc = vfloat(bias[c]);
        for (int ky = 0; ky < g.kh; ++ky) {
          const float* irow = inc + int64_t(oy + ky) * g.in_rstride + ox;
          for (int kx = 0; kx < g.kw; ++kx)
            acc += vfloat(wc[ky * g.kw + kx]) * vload(irow + kx);
        }
        vstore(orow + ox, acc);
      }
      for (; ox < g.out_w; ++ox) {
        float acc = bias[c];
        for (int ky = 0; ky < g.kh; ++ky)
          for (int kx = 0; kx < g.kw; ++kx)
            acc += inc[int64_t(oy + ky) * g.in_rstride + ox + kx] *
                   wc[ky * g.kw + kx];
        orow[ox] = acc;
      }
    }
  }
}

// generic stride-1: lanes over ox, (ky, kx, ic) accumulation.
void conv_generic_s1(const float* in, const float* w, const float* bias,
                     float* out, const ConvGeom& g) {
  const int cpg = g.in_c / g.groups;
  const int opg = g.out_c / g.groups;
  const int64_t wock = int64_t(cpg) * g.kh * g.kw;
  for (int oc = 0; oc < g.out_c; ++oc) {
    const int grp = oc / opg;
    const float* wc = w + oc * wock;
    const float* ing = in + int64_t(grp) * cpg * g.in_cstride;
    float* outc = out + oc * g.out_cstride;
    for (int oy = 0; oy < g.out_h; ++oy) {
      float* orow = outc + int64_t(oy) * g.out_rstride;
      int ox = 0;
      for (; ox + kV <= g.out_w; ox += kV) {
        vfloat acc = vfloat(bias[oc]);
        for (int ky = 0; ky < g.kh; ++ky) {
          for (int kx = 0; kx < g.kw; ++kx) {
            const float* ipix = ing + int64_t(oy + ky) * g.in_rstride + ox + kx;
            const float* wk = wc + (ky * g.kw + kx);
            for (int ic = 0; ic < cpg; ++ic)
              acc += vfloat(wk[int64_t(ic) * g.kh * g.kw]) *
                     vload(ipix + ic * g.in_cstride);
          }
        }
        vstore(orow + ox, acc);
      }
      for (; ox < g.out_w; ++ox) {
        float acc = bias[oc];
        for (int ky = 0; ky < g.kh; ++ky)
          for (int kx = 0; kx < g.kw; ++kx) {
            const float* ipix = ing + int64_t(oy + ky) * g.in_rstride + ox + kx;
            const float* wk = wc + (ky * g.kw + kx);
            for (int ic = 0; ic < cpg; ++ic)
              acc += ipix[ic * g.in_cstride] * wk[int64_t(ic) * g.kh * g.kw];
          }
        orow[ox] = acc;
      }
    }
  }
}

// strided conv: input lanes are not contiguous, so vectorize over output
// channels instead with weights repacked to (ky, kx, ic, oc).
void conv_strided(const float* in, const float* w, const float* bias,
                  float* out, const ConvGeom& g) {
  const int cpg = g.in_c;  // groups == 1 on this path
  std::vector<float> wp(size_t(g.kh) * g.kw * cpg * g.out_c);
  for (int oc = 0; oc < g.out_c; ++oc)
    for (int ic = 0; ic < cpg; ++ic)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx)
          wp[((size_t(ky) * g.kw + kx) * cpg + ic) * g.out_c + oc] =
              w[((int64_t(oc) * cpg + ic) * g.kh + ky) * g.kw + kx];

  const int ocv = g.out_c - g.out_c % kV;
  float lanes[kV];
  for (int oy = 0; oy < g.out_h; ++oy) {
    const int iy0 = oy * g.stride;
    for (int ox = 0; ox < g.out_w; ++ox) {
      const int ix0 = ox * g.stride;
      for (int oc0 = 0; oc0 < ocv; oc0 += kV) {
        vfloat acc = vload(bias + oc0);
        for (int ky = 0; ky < g.kh; ++ky)
          for (int kx = 0; kx < g.kw; ++kx) {
            const float* ipix = in + int64_t(iy0 + ky) * g.in_rstride + ix0 + kx;
            const float* wk = wp.data() + (size_t(ky) * g.kw + kx) * cpg * g.out_c + oc0;
            for (int ic = 0; ic < cpg; ++ic)
              acc += vfloat(ipix[ic * g.in_cstride]) * vload(wk + size_t(ic) * g.out_c);
          }
        acc.copy_to(lanes, stdx::element_aligned);
        for (int l = 0; l < kV; ++l)
          out[(oc0 + l) * g.out_cstride + int64_t(oy) * g.out_rstride + ox] = lanes[l];
      }
      for (int oc = ocv; oc < g.out_c; ++oc) {
        float acc = bias[oc];
        for (int ky = 0; ky < g.kh; ++ky)
          for (int kx = 0; kx < g.kw; ++kx) {
            const float* ipix = in + int64_t(iy0 + ky) * g.in_rstride + ix0 + kx;
            const float* wk = w + ((int64_t(oc) * cpg) * g.kh + ky) * g.kw + kx;
            for (int ic = 0; ic < cpg; ++ic)
              acc += ipix[ic * g.in_cstride] * wk[int64_t(ic) * g.kh * g.kw];
          }
        out[oc * g.out_cstride + int64_t(oy) * g.out_rstride + ox] = acc;
      }
    }
  }
}

void conv_valid_simd(const float* in, const float* w, const float* bias,
                     float* out, const ConvGeom& g) {
  if (g.stride == 1) {
    if (g.kh == 1 && g.kw == 1) {
      conv1x1_s1(in, w, bias, out, g);
    } else if (g.groups == g.in_c && g.in_c == g.out_c) {
      conv_dw_s1(in, w, bias, out, g);
    } else {
      conv_generic_s1(in, w, bias, out, g);
    }
  } else if (g.groups == 1) {
    conv_strided(in, w, bias, out, g);
  } else {
    scalar_kernels().conv_valid(in, w, bias, out, g);
  }
}

void relu_simd(float* data, size_t n) {
  const vfloat zero = vfloat(0.0f);
  size_t i = 0;
  for (; i + kV <= n; i += kV) vstore(data + i, stdx::max(vload(data + i), zero));
  for (; i < n; ++i) data[i] = std::max(0.0f, data[i]);
}

void gemm_acc_simd(float* c, const float* a, const float* b, int m, int k,
                   int n) {
  const int nv = n - n % kV;
  for (int i0 = 0; i0 < m;) {
    const int mu = std::min(4, m - i0);
    for (int j = 0; j < nv; j += kV) {
      vfloat acc[4];
      for (int u = 0; u < mu; ++u) acc[u] = vload(c + int64_t(i0 + u) * n + j);
      for (int kk = 0; kk < k; ++kk) {
        const vfloat bv = vload(b + int64_t(kk) * n + j);
        for (int u = 0; u < mu; ++u)
          acc[u] += vfloat(a[int64_t(i0 + u) * k + kk]) * bv;
      }
      for (int u = 0; u < mu; ++u) vstore(c + int64_t(i0 + u) * n + j, acc[u]);
    }
    for (int u = 0; u < mu; ++u) {
      for (int j = nv; j < n; ++j) {
        float acc = c[int64_t(i0 + u) * n + j];
        for (int kk = 0; kk < k; ++kk)
          acc += a[int64_t(i0 + u) * k + kk] * b[int64_t(kk) * n + j];
        c[int64_t(i0 + u) * n + j] = acc;
      }
    }
    i0 += mu;
  }
}

void outer_acc_simd(float* g, const float* kr, const float* vr, int dk,
                    int dv) {
  const int nv = dv - dv % kV;
  for (int i = 0; i < dk; ++i) {
    float* grow = g + int64_t(i) * dv;
    const vfloat ki = vfloat(kr[i]);
    int j = 0;
    for (; j < nv; j += kV) vstore(grow + j, vload(grow + j) + ki * vload(vr + j));
    for (; j < dv; ++j) grow[j] += kr[i] * vr[j];
  }
}

void colwise_max_simd(float* acc, const float* row, int n) {
  int j = 0;
  for (; j + kV <= n; j += kV)
    vstore(acc + j, stdx::max(vload(acc + j), vload(row + j)));
  for (; j < n; ++j) acc[j] = std::max(acc[j], row[j]);
}

void colwise_add_simd(float* acc, const float* row, int n) {
  int j = 0;
  for (; j + kV <= n; j += kV) vstore(acc + j, vload(acc + j) + vload(row + j));
  for (; j < n; ++j) acc[j] += row[j];
}

void add_inplace_simd(float* dst, const float* src, size_t n) {
  size_t i = 0;
  for (; i + kV <= n; i += kV) vstore(dst + i, vload(dst + i) + vload(src + i));
  for (; i < n; ++i) dst[i] += src[i];
}

}  // namespace

const Kernels& simd_kernels() {
  static const Kernels k = {
#if defined(__AVX2__)
      "avx2",
#else
      "neon",
#endif
      conv_valid_simd, relu_simd,        gemm_acc_simd,   outer_acc_simd,
      colwise_max_simd, colwise_add_simd, add_inplace_simd,
  };
  return k;
}

bool simd_target_built() { return true; }

}  // namespace ehsnet::kern

#else  // no SIMD target for this architecture

namespace ehsnet::kern {
const Kernels& simd_kernels() { return scalar_kernels(); }
bool simd_target_built() { return false; }
}  // namespace ehsnet::kern

#endif
