#include "ehsnet/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ehsnet/kernels.hpp"
#include "ehsnet/prng.hpp"

namespace ehsnet {

Tensor seeded_init(Shape shape, InitScheme scheme, uint64_t seed) {
  Tensor t(shape);
  switch (scheme) {
    case InitScheme::kZeros:
      break;
    case InitScheme::kOnes:
      std::fill(t.data.begin(), t.data.end(), 1.0f);
      break;
    case InitScheme::kUniformFanIn: {
      const int64_t fan_in = int64_t(shape.c) * shape.h * shape.w;
      const float b = 1.0f / std::sqrt(float(std::max<int64_t>(fan_in, 1)));
      for (int64_t i = 0; i < t.numel(); ++i)
        t.data[i] = (2.0f * uniform01_at(seed, uint64_t(i)) - 1.0f) * b;
      break;
    }
  }
  return t;
}

ConvWeights seeded_conv(int out_c, int in_c, int k, int stride, int groups,
                        uint64_t seed) {
  ConvWeights w;
  w.out_c = out_c;
  w.in_c_per_group = in_c / groups;
  w.kh = w.kw = k;
  w.stride = stride;
  w.padding = (k - 1) / 2;
  w.groups = groups;
  const int64_t fan_in = int64_t(w.in_c_per_group) * k * k;
  const float b = 1.0f / std::sqrt(float(fan_in));
  w.kernel.resize(size_t(out_c) * w.in_c_per_group * k * k);
  w.bias.resize(out_c);
  for (size_t i = 0; i < w.kernel.size(); ++i)
    w.kernel[i] = (2.0f * uniform01_at(seed, i) - 1.0f) * b;
  for (size_t i = 0; i < w.bias.size(); ++i)
    w.bias[i] = (2.0f * uniform01_at(seed + 1, i) - 1.0f) * b;
  return w;
}

namespace detail {

Tensor pad_zero(const Tensor& input, int pad) {
  if (pad == 0) return input;
  const Shape s = input.shape;
  Tensor out({s.n, s.c, s.h + 2 * pad, s.w + 2 * pad});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = input.plane(n, c);
      float* dst = out.plane(n, c) + int64_t(pad) * out.shape.w + pad;
      for (int y = 0; y < s.h; ++y)
        std::memcpy(dst + int64_t(y) * out.shape.w, src + int64_t(y) * s.w,
                    size_t(s.w) * sizeof(float));
    }
  return out;
}

Tensor conv2d_valid(const Tensor& input, const ConvWeights& w) {
  const Shape s = input.shape;
  const int out_h = (s.h - w.kh) / w.stride + 1;
  const int out_w = (s.w - w.kw) / w.stride + 1;
  Tensor out({s.n, w.out_c, out_h, out_w});
  kern::ConvGeom g;
  g.in_c = s.c;
  g.in_rstride = s.w;
  g.in_cstride = int64_t(s.h) * s.w;
  g.out_c = w.out_c;
  g.out_h = out_h;
  g.out_w = out_w;
  g.out_rstride = out_w;
  g.out_cstride = int64_t(out_h) * out_w;
  g.kh = w.kh;
  g.kw = w.kw;
  g.stride = w.stride;
  g.groups = w.groups;
  const auto& k = kern::active_kernels();
  for (int n = 0; n < s.n; ++n)
    k.conv_valid(input.plane(n, 0), w.kernel.data(), w.bias.data(),
                 out.plane(n, 0), g);
  return out;
}

}  // namespace detail

Tensor conv2d(const Tensor& input, const ConvWeights& w) {
  const Shape s = input.shape;
  if (w.kh % 2 == 0 || w.kw % 2 == 0)
    throw std::invalid_argument("conv2d requires odd kernel sizes, got " +
                                std::to_string(w.kh) + "x" + std::to_string(w.kw));
  if (s.c != w.in_c())
    throw std::invalid_argument(
        "conv2d channel mismatch: input " + s.str() + " vs weights (" +
        std::to_string(w.out_c) + "," + std::to_string(w.in_c_per_group) + "," +
        std::to_string(w.kh) + "," + std::to_string(w.kw) + ") groups=" +
        std::to_string(w.groups));
  if (s.c % w.groups != 0)
    throw std::invalid_argument("conv2d: channels " + std::to_string(s.c) +
                                " not divisible by groups " +
                                std::to_string(w.groups));
  if (w.stride == 1 && w.padding != (w.kh - 1) / 2)
    throw std::invalid_argument(
        "conv2d: stride-1 convolutions use same padding (k-1)/2, got pad=" +
        std::to_string(w.padding) + " for k=" + std::to_string(w.kh));
  if (s.h + 2 * w.padding < w.kh || s.w + 2 * w.padding < w.kw)
    throw std::invalid_argument("conv2d: input " + s.str() +
                                " smaller than kernel " + std::to_string(w.kh) +
                                "x" + std::to_string(w.kw));
  return detail::conv2d_valid(detail::pad_zero(input, w.padding), w);
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  kern::active_kernels().relu(out.data.data(), out.data.size());
  return out;
}

Tensor softmax(const Tensor& input, int axis) {
  if (axis < 0 || axis > 3)
    throw std::invalid_argument("softmax: axis must be in [0,3], got " +
                                std::to_string(axis));
  const Shape s = input.shape;
  const int dims[4] = {s.n, s.c, s.h, s.w};
  const int64_t strides[4] = {int64_t(s.c) * s.h * s.w, int64_t(s.h) * s.w,
                              s.w, 1};
  const int len = dims[axis];
  const int64_t stride = strides[axis];
  Tensor out = input;
  // Iterate all positions with the axis coordinate fixed at 0.
  int odims[3];
  int64_t ostrides[3];
  int no = 0;
  for (int d = 0; d < 4; ++d)
    if (d != axis) {
      odims[no] = dims[d];
      ostrides[no] = strides[d];
      ++no;
    }
  for (int a = 0; a < odims[0]; ++a)
    for (int b = 0; b < odims[1]; ++b)
      for (int c = 0; c < odims[2]; ++c) {
        float* base =
            out.data.data() + a * ostrides[0] + b * ostrides[1] + c * ostrides[2];
        float mx = base[0];
        for (int i = 1; i < len; ++i) mx = std::max(mx, base[i * stride]);
        float sum = 0.0f;
        for (int i = 0; i < len; ++i) {
          const float e = std::exp(base[i * stride] - mx);
          base[i * stride] = e;
          sum += e;
        }
        for (int i = 0; i < len; ++i) base[i * stride] /= sum;
      }
  return out;
}

Tensor concat(const std::vector<Tensor>& inputs, int axis) {
  if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis < 0 || axis > 3)
    throw std::invalid_argument("concat: axis must be in [0,3]");
  const Shape s0 = inputs[0].shape;
  int axis_sum = 0;
  for (const Tensor& t : inputs) {
    const int d[4] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    const int d0[4] = {s0.n, s0.c, s0.h, s0.w};
    for (int i = 0; i < 4; ++i)
      if (i != axis && d[i] != d0[i])
        throw std::invalid_argument("concat: shape " + t.shape.str() +
                                    " incompatible with " + s0.str() +
                                    " on axis " + std::to_string(axis));
    axis_sum += d[axis];
  }
  int od[4] = {s0.n, s0.c, s0.h, s0.w};
  od[axis] = axis_sum;
  Tensor out({od[0], od[1], od[2], od[3]});

  // Copy block-wise: outer = product of dims before axis, inner = product
  // after; each input contributes a contiguous (len*inner) run per outer step.
  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= od[i];
  int64_t inner_len = 1;
  for (int i = axis + 1; i < 4; ++i) inner_len *= od[i];

  int64_t off = 0;
  for (const Tensor& t : inputs) {
    const int d[4] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    const int64_t run = int64_t(d[axis]) * inner_len;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data.data() + o * (int64_t(axis_sum) * inner_len) + off,
                  t.data.data() + o * run, size_t(run) * sizeof(float));
    off += run;
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: output size must be >= 1");
  const Shape s = input.shape;
  Tensor out({s.n, s.c, out_h, out_w});
  const float sy = float(s.h) / float(out_h);
  const float sx = float(s.w) / float(out_w);
  std::vector<int> x0(out_w), x1(out_w);
  std::vector<float> tx(out_w);
  for (int ox = 0; ox < out_w; ++ox) {
    const float srcx = (float(ox) + 0.5f) * sx - 0.5f;
    const float fx = std::floor(srcx);
    tx[ox] = srcx - fx;
    x0[ox] = std::clamp(int(fx), 0, s.w - 1);
    x1[ox] = std::clamp(int(fx) + 1, 0, s.w - 1);
  }
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* src = input.plane(n, c);
      float* dst = out.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const float srcy = (float(oy) + 0.5f) * sy - 0.5f;
        const float fy = std::floor(srcy);
        const float ty = srcy - fy;
        const int y0 = std::clamp(int(fy), 0, s.h - 1);
        const int y1 = std::clamp(int(fy) + 1, 0, s.h - 1);
        const float* r0 = src + int64_t(y0) * s.w;
        const float* r1 = src + int64_t(y1) * s.w;
        float* orow = dst + int64_t(oy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
          const float top = r0[x0[ox]] + (r0[x1[ox]] - r0[x0[ox]]) * tx[ox];
          const float bot = r1[x0[ox]] + (r1[x1[ox]] - r1[x0[ox]]) * tx[ox];
          orow[ox] = top + (bot - top) * ty;
        }
      }
    }
  return out;
}

}  // namespace ehsnet
