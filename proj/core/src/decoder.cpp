// Copyright 2026 The C3 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "c3/decoder.hpp"

#include <cmath>

#include <stdexcept>
#include <string>

namespace c3 {
namespace {

// Leaky so that units pushed negative early on can recover.
RVar act(const RVar& x) { return ops::leaky_relu(x, 0.1f); }

}  // namespace

Tensor<float> OutputSet::slot(int i) const {
  const Index n = outputs.dim(3);
  if (i < 0 || i >= n) throw std::out_of_range("output slot " + std::to_string(i) + " out of range");
  const Index pixels = outputs.size() / (n * 3);
  Tensor<float> out({outputs.dim(0), outputs.dim(1), outputs.dim(2), 3});
  for (Index p = 0; p < pixels; ++p)
    for (Index c = 0; c < 3; ++c) out[p * 3 + c] = outputs[(p * n + i) * 3 + c];
  return out;
}

template <typename T>
Var<T> compose(const Var<T>& layers, const Var<T>& coeffs, int m) {
  const Tensor<T>& l = layers.value();
  const Tensor<T>& b = coeffs.value();
  if (l.rank() != b.rank() || l.rank() < 2) {
    throw std::invalid_argument("compose: layer " + shape_string(l.shape()) + " and coefficient " +
                                shape_string(b.shape()) + " ranks differ");
  }
  for (int a = 0; a + 1 < l.rank(); ++a) {
    if (l.dim(a) != b.dim(a)) {
      throw std::invalid_argument("compose: layer " + shape_string(l.shape()) + " and coefficient " +
                                  shape_string(b.shape()) + " grids differ");
    }
  }
  if (m < 1 || l.dim(-1) != Index{m} * 3) {
    throw std::invalid_argument("compose: layers carry " + std::to_string(l.dim(-1)) +
                                " channels, expected 3*m with m=" + std::to_string(m));
  }
  if (b.dim(-1) % m != 0) {
    throw std::invalid_argument("compose: " + std::to_string(b.dim(-1)) +
                                " coefficient channels are not a multiple of m=" + std::to_string(m));
  }
  const Index n = b.dim(-1) / m;
  const Index pixels = l.size() / (Index{m} * 3);
  Shape shape = l.shape();
  shape.back() = n * 3;
  Tensor<T> out(shape);
  const T* lp = l.data();
  const T* bp = b.data();
  T* op = out.data();
  for (Index p = 0; p < pixels; ++p) {
    const T* lv = lp + p * m * 3;
    const T* bv = bp + p * n * m;
    T* ov = op + p * n * 3;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) {
        const T beta = bv[i * m + j];
        for (Index c = 0; c < 3; ++c) ov[i * 3 + c] += beta * lv[j * 3 + c];
      }
  }
  return make_result<T>(std::move(out), {layers, coeffs}, [pixels, n, m = Index{m}](Node<T>& node) {
    auto& pl = *node.parents[0];
    auto& pb = *node.parents[1];
    const T* gy = node.grad.data();
    const T* lp = pl.value.data();
    const T* bp = pb.value.data();
    T* gl = pl.requires_grad ? pl.grad_buffer().data() : nullptr;
    T* gb = pb.requires_grad ? pb.grad_buffer().data() : nullptr;
    for (Index p = 0; p < pixels; ++p) {
      const T* g = gy + p * n * 3;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) {
          if (gl) {
            const T beta = bp[p * n * m + i * m + j];
            for (Index c = 0; c < 3; ++c) gl[p * m * 3 + j * 3 + c] += beta * g[i * 3 + c];
          }
          if (gb) {
            T acc = 0;
            for (Index c = 0; c < 3; ++c) acc += lp[p * m * 3 + j * 3 + c] * g[i * 3 + c];
            gb[p * n * m + i * m + j] += acc;
          }
        }
    }
  });
}

template Var<float> compose(const Var<float>&, const Var<float>&, int);
template Var<double> compose(const Var<double>&, const Var<double>&, int);

OutputSet compose(const LayerSet& layers, const CoeffSet& coeffs) {
  if (layers.layers.rank() != 5 || layers.layers.dim(4) != 3) {
    throw std::invalid_argument("compose: layers must be [T,W,H,m,3], got " + shape_string(layers.layers.shape()));
  }
  if (coeffs.coeffs.rank() != 5) {
    throw std::invalid_argument("compose: coefficients must be [T,W,H,n,m], got " +
                                shape_string(coeffs.coeffs.shape()));
  }
  if (coeffs.m() != layers.m()) {
    throw std::invalid_argument("compose: coefficients address " + std::to_string(coeffs.m()) + " layers, got " +
                                std::to_string(layers.m()));
  }
  const Shape& ls = layers.layers.shape();
  const Shape& bs = coeffs.coeffs.shape();
  auto l = RVar::constant(layers.layers.reshaped({ls[0], ls[1], ls[2], ls[3] * 3}));
  auto b = RVar::constant(coeffs.coeffs.reshaped({bs[0], bs[1], bs[2], bs[3] * bs[4]}));
  OutputSet out;
  out.outputs = compose(l, b, layers.m()).value().reshaped({ls[0], ls[1], ls[2], bs[3], 3});
  return out;
}

LayerGenerator::LayerGenerator(const DecoderConfig& config, ParameterStore& store, std::mt19937_64& rng)
    : config_(config) {
  if (config_.m < 1 || config_.n < 1) throw std::invalid_argument("decoder: m and n must be >= 1");
  if (!(config_.initial_layer_level > 0 && config_.initial_layer_level < 1)) {
    throw std::invalid_argument("decoder: initial layer level must lie in (0,1)");
  }
  const auto& sc = config_.skip_channels;
  const auto& wd = config_.widths;
  const auto& st = config_.strides;
  const int top = config_.top_channels;
  up3_ = UpConv3dLayer::create(store, "decoder/up3", st[3], config_.bottleneck_channels, wd[2], rng);
  conv3_ = Conv3dLayer::create(store, "decoder/conv3", {3, 3, 3}, wd[2] + sc[2], wd[2], {1, 1, 1}, rng);
  up2_ = UpConv3dLayer::create(store, "decoder/up2", st[2], wd[2], wd[1], rng);
  conv2_ = Conv3dLayer::create(store, "decoder/conv2", {3, 3, 3}, wd[1] + sc[1], wd[1], {1, 1, 1}, rng);
  up1_ = UpConv3dLayer::create(store, "decoder/up1", st[1], wd[1], wd[0], rng);
  conv1_ = Conv3dLayer::create(store, "decoder/conv1", {3, 3, 3}, wd[0] + sc[0], wd[0], {1, 1, 1}, rng);
  up0_ = UpConv3dLayer::create(store, "decoder/up0", st[0], wd[0], top, rng);
  conv0_ = Conv3dLayer::create(store, "decoder/conv0", config_.top_kernel, top + 3, top, {1, 1, 1}, rng);
  layer_head_ = Conv3dLayer::create(store, "decoder/layer_head", {1, 1, 1}, top, config_.m * 3, {1, 1, 1}, rng);
  coeff_head_ =
      Conv3dLayer::create(store, "decoder/coeff_head", {1, 1, 1}, top, config_.n * config_.m, {1, 1, 1}, rng);
  // Outputs start near the mean layer instead of the sum of m layers.
  if (config_.m > 1) {
    for (auto& b : coeff_head_.bias.mutable_value().values()) b = -std::log(static_cast<float>(config_.m - 1));
  }
  const float level = config_.initial_layer_level;
  for (auto& b : layer_head_.bias.mutable_value().values()) b = std::log(level / (1.0f - level));
}

namespace {
void expect_grid(const RVar& a, const RVar& b, const char* what) {
  for (int ax = 0; ax < 4; ++ax) {
    if (a.dim(ax) != b.dim(ax)) {
      throw std::invalid_argument(std::string("decoder: ") + what + " " + shape_string(b.shape()) +
                                  " does not match upsampled " + shape_string(a.shape()));
    }
  }
}
}  // namespace

LayerGenerator::Output LayerGenerator::operator()(const std::vector<RVar>& skips, const RVar& bottleneck,
                                                  const RVar& video) const {
  if (skips.size() != 3) {
    throw std::invalid_argument("decoder: expected 3 skip levels, got " + std::to_string(skips.size()));
  }
  if (bottleneck.value().rank() != 5 || bottleneck.dim(4) != config_.bottleneck_channels) {
    throw std::invalid_argument("decoder: bottleneck " + shape_string(bottleneck.shape()) + " lacks " +
                                std::to_string(config_.bottleneck_channels) + " channels");
  }
  for (int l = 0; l < 3; ++l) {
    const RVar& s = skips[static_cast<std::size_t>(l)];
    if (s.value().rank() != 5 || s.dim(4) != config_.skip_channels[static_cast<std::size_t>(l)]) {
      throw std::invalid_argument("decoder: skip level " + std::to_string(l) + " " + shape_string(s.shape()) +
                                  " lacks " + std::to_string(config_.skip_channels[static_cast<std::size_t>(l)]) +
                                  " channels");
    }
  }
  RVar x = up3_(bottleneck);
  expect_grid(x, skips[2], "skip level 2");
  x = act(conv3_(ops::concat_last<float>({x, skips[2]})));
  x = up2_(x);
  expect_grid(x, skips[1], "skip level 1");
  x = act(conv2_(ops::concat_last<float>({x, skips[1]})));
  x = up1_(x);
  expect_grid(x, skips[0], "skip level 0");
  x = act(conv1_(ops::concat_last<float>({x, skips[0]})));
  x = up0_(x);
  expect_grid(x, video, "input video");
  x = act(conv0_(ops::concat_last<float>({x, video})));
  return {ops::sigmoid(layer_head_(x)), ops::sigmoid(coeff_head_(x))};
}

}  // namespace c3
