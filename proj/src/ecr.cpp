#include "ehsnet/ecr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <stdexcept>

#include "ehsnet/kernels.hpp"
#include "ehsnet/prng.hpp"
#include "ehsnet/tile_plan.hpp"

namespace ehsnet {
namespace {

thread_local uint64_t g_mul_count = 0;

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dims " + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows));
  Mat c(a.rows, b.cols);
  kern::active_kernels().gemm_acc(c.data.data(), a.data.data(), b.data.data(),
                                  int(a.rows), int(a.cols), int(b.cols));
  g_mul_count += uint64_t(a.rows) * a.cols * b.cols;
  return c;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

void softmax_rows_inplace(Mat& m) {
  for (int64_t i = 0; i < m.rows; ++i) {
    float* r = m.row(i);
    float mx = r[0];
    for (int64_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    float sum = 0.0f;
    for (int64_t j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int64_t j = 0; j < m.cols; ++j) r[j] /= sum;
  }
}

// (N x c) pixel-major view of a planar feature map.
Mat flatten_pixel_major(const Tensor& t) {
  const int64_t n = int64_t(t.shape.h) * t.shape.w;
  Mat x(n, t.shape.c);
  for (int c = 0; c < t.shape.c; ++c) {
    const float* p = t.plane(0, c);
    for (int64_t i = 0; i < n; ++i) x.at(i, c) = p[i];
  }
  return x;
}

void check_projections(const AttentionParams& p, int d_in) {
  if (p.w_q.rows != d_in || p.w_k.rows != d_in || p.w_v.rows != d_in)
    throw std::invalid_argument(
        "attention: projection rows must equal feature dim " +
        std::to_string(d_in));
  if (p.w_q.cols != p.w_k.cols || p.w_k.cols != p.w_v.cols)
    throw std::invalid_argument("attention: projection widths disagree");
}

// Feeds every feature row (pixel-major) to `sink` in ascending pixel order;
// may be called once per pass.
using StripSource =
    std::function<void(const std::function<void(const float*, int64_t)>&)>;

// Q * (K^T V) with optional Shen-style normalization. The context
// accumulation consumes pixels strictly in ascending order, one at a time,
// so any strip partition of the source yields identical bits.
Mat efficient_attention_impl(int d_in, int64_t strip_capacity,
                             const StripSource& for_each_strip,
                             const Mat& f_hard, const AttentionParams& p) {
  check_projections(p, d_in);
  const int da = int(p.w_k.cols);
  const auto& kt = kern::active_kernels();
  const bool softmax_mode = p.mode == AttentionMode::kSoftmaxNormalized;

  std::vector<float> kproj(size_t(strip_capacity) * da);
  std::vector<float> vproj(size_t(strip_capacity) * da);
  std::vector<float> colmax(size_t(da), -std::numeric_limits<float>::infinity());
  std::vector<float> z(size_t(da), 0.0f);
  std::vector<float> erow(size_t(da), 0.0f);
  Mat ctx(da, da);

  auto project = [&](std::vector<float>& dst, const Mat& w, const float* rows,
                     int64_t npix) {
    std::fill(dst.begin(), dst.begin() + size_t(npix) * da, 0.0f);
    kt.gemm_acc(dst.data(), rows, w.data.data(), int(npix), d_in, da);
    g_mul_count += uint64_t(npix) * d_in * da;
  };

  if (softmax_mode) {
    for_each_strip([&](const float* rows, int64_t npix) {
      project(kproj, p.w_k, rows, npix);
      for (int64_t i = 0; i < npix; ++i)
        kt.colwise_max(colmax.data(), kproj.data() + size_t(i) * da, da);
    });
  }
  for_each_strip([&](const float* rows, int64_t npix) {
    project(kproj, p.w_k, rows, npix);
    project(vproj, p.w_v, rows, npix);
    for (int64_t i = 0; i < npix; ++i) {
      const float* krow = kproj.data() + size_t(i) * da;
      const float* vrow = vproj.data() + size_t(i) * da;
      if (softmax_mode) {
        for (int j = 0; j < da; ++j) erow[j] = std::exp(krow[j] - colmax[j]);
        kt.colwise_add(z.data(), erow.data(), da);
        kt.outer_acc(ctx.data.data(), erow.data(), vrow, da, da);
      } else {
        kt.outer_acc(ctx.data.data(), krow, vrow, da, da);
      }
      g_mul_count += uint64_t(da) * da;
    }
  });
  if (softmax_mode)
    for (int j = 0; j < da; ++j) {
      float* row = ctx.row(j);
      for (int i = 0; i < da; ++i) row[i] /= z[j];
    }

  Mat q = matmul(f_hard, p.w_q);
  if (softmax_mode) softmax_rows_inplace(q);
  return matmul(q, ctx);
}

}  // namespace

uint64_t attention_mul_count() { return g_mul_count; }
void reset_attention_mul_count() { g_mul_count = 0; }

AttentionParams attention_random_params(int d_in, int d_attn,
                                        AttentionMode mode, uint64_t seed) {
  AttentionParams p;
  p.mode = mode;
  const float b = 1.0f / std::sqrt(float(d_in));
  for (Mat* m : {&p.w_q, &p.w_k, &p.w_v}) {
    *m = Mat(d_in, d_attn);
    for (size_t i = 0; i < m->data.size(); ++i)
      m->data[i] = (2.0f * uniform01_at(seed, i) - 1.0f) * b;
    ++seed;
  }
  return p;
}

Tensor top2_margin(const Tensor& aux_logits) {
  const Shape s = aux_logits.shape;
  if (s.c < 2)
    throw std::invalid_argument("top2_margin: need >= 2 classes, got " +
                                std::to_string(s.c));
  Tensor out({s.n, 1, s.h, s.w});
  const int64_t hw = int64_t(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    float* dst = out.plane(n, 0);
    for (int64_t i = 0; i < hw; ++i) {
      float top = -std::numeric_limits<float>::infinity();
      float second = top;
      for (int c = 0; c < s.c; ++c) {
        const float v = aux_logits.plane(n, c)[i];
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      dst[i] = top - second;
    }
  }
  return out;
}

HardRegion select_hard_region(const Tensor& margins, double a_percent) {
  if (!(a_percent > 0.0) || a_percent > 100.0)
    throw std::invalid_argument("select_hard_region: a must be in (0, 100], got " +
                                std::to_string(a_percent));
  const Shape s = margins.shape;
  if (s.n != 1 || s.c != 1)
    throw std::invalid_argument("select_hard_region: margins must be (1,1,h,w)");
  const int64_t n = int64_t(s.h) * s.w;
  const auto m = int64_t(std::ceil(a_percent * double(n) / 100.0));
  std::vector<std::pair<float, int64_t>> order(size_t(n));
  for (int64_t i = 0; i < n; ++i) order[size_t(i)] = {margins.data[size_t(i)], i};
  std::sort(order.begin(), order.end());  // (margin, index) ascending
  HardRegion r;
  r.indices.resize(size_t(m));
  for (int64_t i = 0; i < m; ++i) r.indices[size_t(i)] = order[size_t(i)].second;
  std::sort(r.indices.begin(), r.indices.end());
  r.margins.resize(size_t(m));
  for (int64_t i = 0; i < m; ++i)
    r.margins[size_t(i)] = margins.data[size_t(r.indices[size_t(i)])];
  return r;
}

Mat gather(const Tensor& f_in, const HardRegion& region) {
  const Shape s = f_in.shape;
  if (s.n != 1) throw std::invalid_argument("gather: batch size must be 1");
  const int64_t hw = int64_t(s.h) * s.w;
  Mat out(int64_t(region.indices.size()), s.c);
  for (size_t i = 0; i < region.indices.size(); ++i) {
    const int64_t idx = region.indices[i];
    if (idx < 0 || idx >= hw)
      throw std::invalid_argument("gather: index " + std::to_string(idx) +
                                  " outside " + std::to_string(hw) + " pixels");
    for (int c = 0; c < s.c; ++c) out.at(int64_t(i), c) = f_in.plane(0, c)[idx];
  }
  return out;
}

Mat generic_attention(const Tensor& f_in, const Mat& f_hard,
                      const AttentionParams& p) {
  check_projections(p, f_in.shape.c);
  Mat x = flatten_pixel_major(f_in);
  Mat k = matmul(x, p.w_k);
  Mat v = matmul(x, p.w_v);
  Mat q = matmul(f_hard, p.w_q);
  if (p.mode == AttentionMode::kSoftmaxNormalized) {
    // Keys: softmax along the spatial axis, per channel.
    const int da = int(k.cols);
    std::vector<float> colmax(size_t(da), -std::numeric_limits<float>::infinity());
    for (int64_t i = 0; i < k.rows; ++i)
      kern::active_kernels().colwise_max(colmax.data(), k.row(i), da);
    std::vector<float> z(size_t(da), 0.0f);
    for (int64_t i = 0; i < k.rows; ++i) {
      float* row = k.row(i);
      for (int j = 0; j < da; ++j) {
        row[j] = std::exp(row[j] - colmax[j]);
        z[size_t(j)] += row[j];
      }
    }
    for (int64_t i = 0; i < k.rows; ++i) {
      float* row = k.row(i);
      for (int j = 0; j < da; ++j) row[j] /= z[size_t(j)];
    }
    softmax_rows_inplace(q);
  }
  Mat scores = matmul(q, transpose(k));  // the explicit |R| x N matrix
  return matmul(scores, v);
}

Mat efficient_attention(const Tensor& f_in, const Mat& f_hard,
                        const AttentionParams& p) {
  Mat x = flatten_pixel_major(f_in);
  StripSource whole = [&](const std::function<void(const float*, int64_t)>& sink) {
    sink(x.data.data(), x.rows);
  };
  return efficient_attention_impl(f_in.shape.c, x.rows, whole, f_hard, p);
}

Tensor scatter(const Mat& f_conf, const HardRegion& region,
               const Tensor& f_in) {
  if (f_conf.rows != int64_t(region.indices.size()))
    throw std::invalid_argument(
        "scatter: " + std::to_string(f_conf.rows) + " rows vs region size " +
        std::to_string(region.indices.size()));
  if (f_conf.cols != f_in.shape.c)
    throw std::invalid_argument("scatter: row width " +
                                std::to_string(f_conf.cols) +
                                " vs feature channels " +
                                std::to_string(f_in.shape.c));
  Tensor out = f_in;
  for (size_t i = 0; i < region.indices.size(); ++i) {
    const int64_t idx = region.indices[i];
    for (int c = 0; c < f_in.shape.c; ++c)
      out.plane(0, c)[idx] += f_conf.at(int64_t(i), c);
  }
  return out;
}

Tensor ecr_forward(const Tensor& f_in, const Tensor& aux_logits,
                   double a_percent, const AttentionParams& p) {
  if (aux_logits.shape.h != f_in.shape.h || aux_logits.shape.w != f_in.shape.w)
    throw std::invalid_argument("ecr_forward: logits " +
                                aux_logits.shape.str() +
                                " not aligned with features " +
                                f_in.shape.str());
  const Tensor margins = top2_margin(aux_logits);
  const HardRegion region = select_hard_region(margins, a_percent);
  const Mat f_hard = gather(f_in, region);
  const Mat f_conf = efficient_attention(f_in, f_hard, p);
  return scatter(f_conf, region, f_in);
}

HandleId ecr_forward_streamed(HandleId f_in, const Tensor& aux_logits,
                              double a_percent, const AttentionParams& p,
                              DeviceArena& arena) {
  const Tensor& fin = arena.peek(f_in);
  const Shape s = fin.shape;
  if (aux_logits.shape.h != s.h || aux_logits.shape.w != s.w)
    throw std::invalid_argument("ecr: logits not aligned with features");
  check_projections(p, s.c);
  const int d = s.c;
  const int da = int(p.w_k.cols);
  if (da != d)
    throw std::invalid_argument(
        "ecr: residual scatter needs attention width == feature width");

  const Tensor margins = top2_margin(aux_logits);
  const HardRegion region = select_hard_region(margins, a_percent);
  const int64_t r = int64_t(region.indices.size());

  // Device-resident persistent state: gathered rows, query rows, context and
  // per-channel normalizer scratch, plus per-strip staging of the feature
  // rows and their K/V projections.
  const size_t persistent =
      (size_t(r) * d + size_t(r) * da + size_t(da) * da + 2 * size_t(da)) *
      sizeof(float);
  const size_t per_row = size_t(s.w) * size_t(d + 2 * da) * sizeof(float);
  if (persistent + per_row > arena.budget())
    throw TilingError("arena budget " + std::to_string(arena.budget()) +
                          " bytes is below the minimal feasible budget of " +
                          std::to_string(persistent + per_row) +
                          " bytes for streamed attention",
                      persistent + per_row);
  const int strip_rows =
      int(std::min<size_t>((arena.budget() - persistent) / per_row, size_t(s.h)));

  const HandleId h_state = arena.alloc_device_bytes(persistent, true);
  const HandleId h_strip =
      arena.alloc_device_bytes(size_t(strip_rows) * per_row, true);
  Tensor& strip_buf = arena.data(h_strip);

  const Mat f_hard = gather(fin, region);
  arena.note_swap_in();  // gathered rows move host -> device

  const int64_t strip_cap = int64_t(strip_rows) * s.w;
  StripSource strips = [&](const std::function<void(const float*, int64_t)>& sink) {
    for (int y0 = 0; y0 < s.h; y0 += strip_rows) {
      const int y1 = std::min(y0 + strip_rows, s.h);
      const int64_t npix = int64_t(y1 - y0) * s.w;
      // Stage planar rows [y0, y1) as pixel-major feature rows.
      float* dst = strip_buf.data.data();
      for (int c = 0; c < d; ++c) {
        const float* sp = fin.plane(0, c) + int64_t(y0) * s.w;
        for (int64_t i = 0; i < npix; ++i) dst[i * d + c] = sp[i];
      }
      arena.note_swap_in();
      sink(dst, npix);
    }
  };
  const Mat f_conf =
      efficient_attention_impl(d, strip_cap, strips, f_hard, p);
  arena.release(h_strip);
  arena.release(h_state);

  Tensor out = fin;
  for (size_t i = 0; i < region.indices.size(); ++i) {
    const int64_t idx = region.indices[i];
    for (int c = 0; c < d; ++c)
      out.plane(0, c)[idx] += f_conf.at(int64_t(i), c);
  }
  arena.note_swap_out();  // enhanced rows return to the host map
  return arena.register_tensor(std::move(out));
}

}  // namespace ehsnet
