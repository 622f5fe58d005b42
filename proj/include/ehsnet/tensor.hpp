#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehsnet {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  int64_t numel() const { return int64_t(n) * c * h * w; }
  size_t bytes() const { return size_t(numel()) * sizeof(float); }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense NCHW float32 tensor, contiguous in n-major then c, h, w order.
// The universal value type for all feature maps, logits and weights.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(size_t(s.numel()), 0.0f) {}
  Tensor(Shape s, std::vector<float> d) : shape(s), data(std::move(d)) {
    if (int64_t(data.size()) != s.numel())
      throw std::invalid_argument("tensor data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + s.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, float v) {
    Tensor t(s);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return shape.numel(); }
  size_t bytes() const { return shape.bytes(); }

  float* plane(int n, int c) {
    return data.data() + (int64_t(n) * shape.c + c) * shape.h * shape.w;
  }
  const float* plane(int n, int c) const {
    return data.data() + (int64_t(n) * shape.c + c) * shape.h * shape.w;
  }

  float& at(int n, int c, int y, int x) {
    return data[((int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
  float at(int n, int c, int y, int x) const {
    return data[((int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x];
  }
};

// Row-major 2-D float matrix, used by the attention path where features are
// handled as (pixel, channel) rows rather than planar maps.
struct Mat {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<float> data;

  Mat() = default;
  Mat(int64_t r, int64_t c) : rows(r), cols(c), data(size_t(r * c), 0.0f) {}

  float* row(int64_t r) { return data.data() + r * cols; }
  const float* row(int64_t r) const { return data.data() + r * cols; }
  float& at(int64_t r, int64_t c) { return data[r * cols + c]; }
  float at(int64_t r, int64_t c) const { return data[r * cols + c]; }
};

}  // namespace ehsnet
