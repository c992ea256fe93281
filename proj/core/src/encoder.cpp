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

#include "c3/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace c3 {
namespace {

// Leaky so that units pushed negative early on can recover.
RVar act(const RVar& x) { return ops::leaky_relu(x, 0.1f); }

}  // namespace

template <typename T>
Var<T> downsample_mask(const Var<T>& masks, ops::Triple target) {
  if (masks.dim(1) == target[0] && masks.dim(2) == target[1] && masks.dim(3) == target[2]) {
    return masks;
  }
  return ops::resize_trilinear(masks, target);
}

template <typename T>
Var<T> gate_features(const Var<T>& features, const Var<T>& masks) {
  if (features.value().rank() != 5 || masks.value().rank() != 5) {
    throw std::invalid_argument("gate_features: expected [N,T,W,H,C] tensors");
  }
  for (int a = 0; a < 4; ++a) {
    if (features.dim(a) != masks.dim(a)) {
      throw std::invalid_argument("gate_features: feature " + shape_string(features.shape()) +
                                  " and mask " + shape_string(masks.shape()) + " grids differ");
    }
  }
  const Index m = masks.dim(4);
  const Index channels = features.dim(4);
  if (m < 1 || channels % m != 0) {
    throw std::invalid_argument("gate_features: " + std::to_string(channels) +
                                " channels are not divisible into " + std::to_string(m) + " groups");
  }
  const Index d = channels / m;
  const Index positions = features.value().size() / channels;
  Tensor<T> out(features.shape());
  const T* f = features.value().data();
  const T* mk = masks.value().data();
  for (Index p = 0; p < positions; ++p)
    for (Index c = 0; c < m; ++c) {
      const T g = mk[p * m + c];
      for (Index k = 0; k < d; ++k) {
        const Index i = p * channels + c * d + k;
        out[i] = g * f[i];
      }
    }
  return make_result<T>(std::move(out), {features, masks}, [positions, m, d, channels](Node<T>& n) {
    auto& pf = *n.parents[0];
    auto& pm = *n.parents[1];
    const T* gy = n.grad.data();
    if (pf.requires_grad) {
      T* gf = pf.grad_buffer().data();
      const T* mk = pm.value.data();
      for (Index p = 0; p < positions; ++p)
        for (Index c = 0; c < m; ++c)
          for (Index k = 0; k < d; ++k) {
            const Index i = p * channels + c * d + k;
            gf[i] += gy[i] * mk[p * m + c];
          }
    }
    if (pm.requires_grad) {
      T* gm = pm.grad_buffer().data();
      const T* f = pf.value.data();
      for (Index p = 0; p < positions; ++p)
        for (Index c = 0; c < m; ++c) {
          T acc = 0;
          for (Index k = 0; k < d; ++k) {
            const Index i = p * channels + c * d + k;
            acc += gy[i] * f[i];
          }
          gm[p * m + c] += acc;
        }
    }
  });
}

template Var<float> downsample_mask(const Var<float>&, ops::Triple);
template Var<double> downsample_mask(const Var<double>&, ops::Triple);
template Var<float> gate_features(const Var<float>&, const Var<float>&);
template Var<double> gate_features(const Var<double>&, const Var<double>&);

Tensor<float> downsample_mask(const Tensor<float>& mask, ops::Triple target) {
  if (mask.rank() != 3) throw std::invalid_argument("downsample_mask: expected [T,W,H]");
  auto v = RVar::constant(mask.reshaped({1, mask.dim(0), mask.dim(1), mask.dim(2), 1}));
  return downsample_mask(v, target).value().reshaped({target[0], target[1], target[2]});
}

FeatureMap gate_features(const FeatureMap& f, const MaskSet& masks) {
  if (f.values.rank() != 4 || masks.masks.rank() != 4) {
    throw std::invalid_argument("gate_features: expected [T,W,H,C] feature map and [T,W,H,m] masks");
  }
  if (f.values.dim(3) % masks.m != 0) {
    throw std::invalid_argument("gate_features: " + std::to_string(f.values.dim(3)) +
                                " channels are not divisible into " + std::to_string(masks.m) + " groups");
  }
  const Shape& fs = f.values.shape();
  const Shape& ms = masks.masks.shape();
  auto fv = RVar::constant(f.values.reshaped({1, fs[0], fs[1], fs[2], fs[3]}));
  auto mv = RVar::constant(masks.masks.reshaped({1, ms[0], ms[1], ms[2], ms[3]}));
  auto ml = downsample_mask(mv, {static_cast<int>(fs[0]), static_cast<int>(fs[1]), static_cast<int>(fs[2])});
  FeatureMap out;
  out.level = f.level;
  out.groups = masks.m;
  out.values = gate_features(fv, ml).value().reshaped(fs);
  return out;
}

Encoder::Encoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng)
    : config_(config) {
  if (config_.m < 1) throw std::invalid_argument("encoder: m must be >= 1");
  for (int level : config_.gated_levels) {
    if (level < 0 || level >= static_cast<int>(config_.channels.size()) - 1) {
      throw std::invalid_argument("encoder: gated level " + std::to_string(level) + " is not a skip level");
    }
    if (config_.channels[static_cast<std::size_t>(level)] % config_.m != 0) {
      throw std::invalid_argument("encoder: level " + std::to_string(level) + " has " +
                                  std::to_string(config_.channels[static_cast<std::size_t>(level)]) +
                                  " channels, not a multiple of m=" + std::to_string(config_.m));
    }
  }
  const int w = config_.mask_width;
  mg_conv1_ = Conv3dLayer::create(store, "maskgen/conv1", {3, 3, 3}, 3, w, {1, 2, 2}, rng);
  mg_conv2_ = Conv3dLayer::create(store, "maskgen/conv2", {3, 3, 3}, w, 2 * w, {2, 2, 2}, rng);
  mg_up1_ = UpConv3dLayer::create(store, "maskgen/up1", {2, 2, 2}, 2 * w, w, rng);
  mg_up2_ = UpConv3dLayer::create(store, "maskgen/up2", {1, 2, 2}, w, config_.m, rng);
  int in = 3;
  for (std::size_t l = 0; l < config_.channels.size(); ++l) {
    trunk_.push_back(Conv3dLayer::create(store, "encoder/conv" + std::to_string(l), {3, 3, 3}, in,
                                         config_.channels[l], config_.strides[l], rng));
    in = config_.channels[l];
  }
}

void Encoder::check_input(Index t, Index w, Index h) const {
  Index st = 1, sw = 1, sh = 1;
  for (const auto& s : config_.strides) {
    st *= s[0];
    sw *= s[1];
    sh *= s[2];
  }
  // The mask generator needs T even and W, H divisible by 4.
  st = std::max<Index>(st, 2);
  sw = std::max<Index>(sw, 4);
  sh = std::max<Index>(sh, 4);
  if (t % st || w % sw || h % sh) {
    throw std::invalid_argument("encoder: clip " + std::to_string(t) + "x" + std::to_string(w) + "x" +
                                std::to_string(h) + " is not divisible by the stride schedule " +
                                std::to_string(st) + "x" + std::to_string(sw) + "x" + std::to_string(sh));
  }
}

std::array<Index, 4> Encoder::level_shape(int level, Index t, Index w, Index h) const {
  for (int l = 0; l <= level; ++l) {
    const auto& s = config_.strides[static_cast<std::size_t>(l)];
    t = (t - 1) / s[0] + 1;
    w = (w - 1) / s[1] + 1;
    h = (h - 1) / s[2] + 1;
  }
  return {t, w, h, config_.channels[static_cast<std::size_t>(level)]};
}

RVar Encoder::generate_masks(const RVar& video) const {
  RVar h1 = act(mg_conv1_(video));
  RVar h2 = act(mg_conv2_(h1));
  RVar u1 = act(ops::add(mg_up1_(h2), h1));
  RVar logits = mg_up2_(u1);
  return ops::softmax_last(logits);
}

Encoder::Output Encoder::encode(const RVar& video) const {
  if (video.value().rank() != 5 || video.dim(4) != 3) {
    throw std::invalid_argument("encoder: expected [N,T,W,H,3] video, got " + shape_string(video.shape()));
  }
  check_input(video.dim(1), video.dim(2), video.dim(3));
  Output out;
  out.masks = generate_masks(video);
  RVar x = video;
  const int levels = static_cast<int>(trunk_.size());
  for (int l = 0; l < levels; ++l) {
    x = act(trunk_[static_cast<std::size_t>(l)](x));
    if (std::find(config_.gated_levels.begin(), config_.gated_levels.end(), l) != config_.gated_levels.end()) {
      RVar ml = downsample_mask(out.masks, {static_cast<int>(x.dim(1)), static_cast<int>(x.dim(2)),
                                            static_cast<int>(x.dim(3))});
      x = gate_features(x, ml);
    }
    if (l + 1 < levels) out.skips.push_back(x);
  }
  out.bottleneck = x;
  return out;
}

MaskSet generate_masks(const Encoder& encoder, const Video& v) {
  const Shape& s = v.frames.shape();
  auto x = RVar::constant(v.frames.reshaped({1, s[0], s[1], s[2], s[3]}));
  MaskSet out;
  out.m = encoder.config().m;
  out.masks = encoder.generate_masks(x).value().reshaped({s[0], s[1], s[2], out.m});
  return out;
}

}  // namespace c3
