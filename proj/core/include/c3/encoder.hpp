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

// Spatio-temporal encoder whose features are gated by self-produced masks.
//
// A separate mask generator maps the video to m softmax-normalised masks
// M in [0,1]^{T x W x H x m}. The trunk's channels at a gated level l are
// split into m contiguous groups of d_l channels, and group c is multiplied
// by mask c resampled to the level's resolution:
//
//   gated[..., c*d_l + k] = resize(M^c)[...] * F_l[..., c*d_l + k]

#pragma once

#include <array>
#include <vector>

#include "c3/domain.hpp"
#include "c3/nn.hpp"

namespace c3 {

struct MaskSet {
  Tensor<float> masks;  // [T, W, H, m]
  int m = 1;
};

struct FeatureMap {
  int level = 0;
  Tensor<float> values;  // [T_l, W_l, H_l, m*d_l]
  int groups = 1;

  Index group_channels() const { return values.dim(-1) / groups; }
};

struct EncoderConfig {
  int m = 4;
  std::array<int, 4> channels{16, 32, 64, 128};
  std::array<ops::Triple, 4> strides{{{1, 2, 2}, {2, 2, 2}, {2, 2, 2}, {1, 2, 2}}};
  // Skip levels whose outputs are gated (the last level is the bottleneck).
  std::vector<int> gated_levels{1, 2};
  int mask_width = 8;
};

// Resamples masks [N,T,W,H,m] to the given resolution.
template <typename T>
Var<T> downsample_mask(const Var<T>& masks, ops::Triple target);

// features [N,T,W,H,m*d] gated by masks [N,T,W,H,m] already at feature
// resolution. Throws std::invalid_argument if the channel count is not a
// multiple of m or the spatial shapes differ.
template <typename T>
Var<T> gate_features(const Var<T>& features, const Var<T>& masks);

// Single-clip conveniences.
Tensor<float> downsample_mask(const Tensor<float>& mask, ops::Triple target);  // [T,W,H]
FeatureMap gate_features(const FeatureMap& f, const MaskSet& masks);

class Encoder {
 public:
  struct Output {
    RVar masks;                // [N,T,W,H,m]
    std::vector<RVar> skips;   // levels 0..L-2, gated where configured
    RVar bottleneck;           // level L-1
  };

  // Registers parameters under "maskgen/" and "encoder/".
  Encoder(const EncoderConfig& config, ParameterStore& store, std::mt19937_64& rng);

  RVar generate_masks(const RVar& video) const;
  Output encode(const RVar& video) const;

  const EncoderConfig& config() const { return config_; }
  // Output shape [T_l, W_l, H_l, C_l] of a level for a [T, W, H] input.
  std::array<Index, 4> level_shape(int level, Index t, Index w, Index h) const;
  // Throws if the clip size is not divisible by the cumulative strides.
  void check_input(Index t, Index w, Index h) const;

 private:
  EncoderConfig config_;
  Conv3dLayer mg_conv1_, mg_conv2_;
  UpConv3dLayer mg_up1_, mg_up2_;
  std::vector<Conv3dLayer> trunk_;
};

// MaskSet of a single clip.
MaskSet generate_masks(const Encoder& encoder, const Video& v);

}  // namespace c3
