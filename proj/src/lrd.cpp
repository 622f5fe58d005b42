#include "ehsnet/lrd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ehsnet {

LrdParams lrd_random_params(int in_c, int k, int d, uint64_t seed) {
  LrdParams p;
  p.in_c = in_c;
  p.k = k;
  p.d = d;
  p.reduce_1x1 = seeded_conv(k, in_c, 1, 1, 1, seed);
  p.conv5 = seeded_conv(k, k, 5, 1, 1, seed + 2);
  p.dw7 = {seeded_conv(k, k, 7, 1, k, seed + 4), seeded_conv(k, k, 1, 1, 1, seed + 6)};
  p.dw15 = {seeded_conv(k, k, 15, 1, k, seed + 8), seeded_conv(k, k, 1, 1, 1, seed + 10)};
  p.dw31 = {seeded_conv(k, k, 31, 1, k, seed + 12), seeded_conv(k, k, 1, 1, 1, seed + 14)};
  p.fuse_1x1 = seeded_conv(k, 5 * k, 1, 1, 1, seed + 16);
  p.expand_1x1 = seeded_conv(d, k, 1, 1, 1, seed + 18);
  return p;
}

void validate(const LrdParams& p) {
  auto expect = [](const ConvWeights& w, int k, const char* what) {
    if (w.kh != k || w.kw != k)
      throw std::invalid_argument(std::string("lrd params: ") + what +
                                  " must be " + std::to_string(k) + "x" +
                                  std::to_string(k) + ", got " +
                                  std::to_string(w.kh) + "x" +
                                  std::to_string(w.kw));
    if (w.stride != 1)
      throw std::invalid_argument(std::string("lrd params: ") + what +
                                  " must be stride 1");
  };
  expect(p.reduce_1x1, 1, "reduce");
  expect(p.conv5, 5, "conv5");
  expect(p.dw7.depthwise, 7, "dw7");
  expect(p.dw15.depthwise, 15, "dw15");
  expect(p.dw31.depthwise, 31, "dw31");
  expect(p.dw7.pointwise, 1, "dw7 pointwise");
  expect(p.dw15.pointwise, 1, "dw15 pointwise");
  expect(p.dw31.pointwise, 1, "dw31 pointwise");
  expect(p.fuse_1x1, 1, "fuse");
  expect(p.expand_1x1, 1, "expand");
  if (p.reduce_1x1.out_c != p.k || p.conv5.out_c != p.k ||
      p.fuse_1x1.out_c != p.k || p.fuse_1x1.in_c() != 5 * p.k ||
      p.expand_1x1.out_c != p.d)
    throw std::invalid_argument("lrd params: channel widths disagree with k/d");
  for (const SeparableConv* s : {&p.dw7, &p.dw15, &p.dw31})
    if (s->depthwise.groups != p.k || s->depthwise.in_c_per_group != 1)
      throw std::invalid_argument("lrd params: branch conv must be depthwise");
}

void zero_branch(SeparableConv& branch) {
  std::fill(branch.depthwise.kernel.begin(), branch.depthwise.kernel.end(), 0.0f);
  std::fill(branch.depthwise.bias.begin(), branch.depthwise.bias.end(), 0.0f);
  std::fill(branch.pointwise.kernel.begin(), branch.pointwise.kernel.end(), 0.0f);
  std::fill(branch.pointwise.bias.begin(), branch.pointwise.bias.end(), 0.0f);
}

namespace {
// Appends the LRDU nodes reading k-channel features from node `src`.
int append_lrdu(OpChain& c, const LrdParams& p, int src) {
  const int f5 = c.add_conv(src, p.conv5);
  const int f7 = c.add_conv(c.add_conv(f5, p.dw7.depthwise), p.dw7.pointwise);
  const int f15 = c.add_conv(c.add_conv(f5, p.dw15.depthwise), p.dw15.pointwise);
  const int f31 = c.add_conv(c.add_conv(f5, p.dw31.depthwise), p.dw31.pointwise);
  const int cat = c.add_concat({src, f5, f7, f15, f31});
  return c.add_conv(cat, p.fuse_1x1);
}
}  // namespace

OpChain lrdu_chain(const LrdParams& p) {
  validate(p);
  OpChain c;
  c.in_channels = p.k;
  append_lrdu(c, p, kChainInput);
  return c;
}

OpChain lrd_chain(const LrdParams& p) {
  validate(p);
  OpChain c;
  c.in_channels = p.in_c;
  const int reduced = c.add_relu(c.add_conv(kChainInput, p.reduce_1x1));
  const int fused = append_lrdu(c, p, reduced);
  c.add_conv(fused, p.expand_1x1);
  return c;
}

Tensor lrdu_forward(const Tensor& f_reduced, const LrdParams& p) {
  return chain_eval(lrdu_chain(p), f_reduced);
}

Tensor lrd_forward(const Tensor& f_in, const LrdParams& p) {
  return chain_eval(lrd_chain(p), f_in);
}

InfluenceProbe::InfluenceProbe(const LrdParams& p, int h, int w, int probe_y,
                               int probe_x, uint64_t input_seed)
    : params_(p),
      probe_y_(probe_y),
      probe_x_(probe_x),
      base_in_(seeded_init({1, p.in_c, h, w}, InitScheme::kUniformFanIn,
                           input_seed)),
      base_out_(lrd_forward(base_in_, p)) {}

float InfluenceProbe::at(int y, int x) const {
  Tensor in = base_in_;
  for (int c = 0; c < in.shape.c; ++c) in.at(0, c, y, x) += 1.0f;
  const Tensor out = lrd_forward(in, params_);
  float m = 0.0f;
  for (int c = 0; c < out.shape.c; ++c)
    m = std::max(m, std::fabs(out.at(0, c, probe_y_, probe_x_) -
                              base_out_.at(0, c, probe_y_, probe_x_)));
  return m;
}

Tensor influence_probe(const LrdParams& p, int h, int w, int probe_y,
                       int probe_x, uint64_t input_seed) {
  InfluenceProbe probe(p, h, w, probe_y, probe_x, input_seed);
  Tensor map({1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) map.at(0, 0, y, x) = probe.at(y, x);
  return map;
}

}  // namespace ehsnet
