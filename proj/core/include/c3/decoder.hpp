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

// Layer generator and linear composition of layers into output videos.
//
// Batched tensors keep the (slot, layer, colour) axes flattened into the
// channel axis: layers use channel j*3+c, coefficients i*m+j and outputs
// i*3+c, so a [T,W,H,m*3] buffer is bit-identical to [T,W,H,m,3].

#pragma once

#include <array>
#include <vector>

#include "c3/nn.hpp"

namespace c3 {

struct LayerSet {
  Tensor<float> layers;  // [T, W, H, m, 3]
  int m() const { return static_cast<int>(layers.dim(3)); }
};

struct CoeffSet {
  Tensor<float> coeffs;  // [T, W, H, n, m]
  int n() const { return static_cast<int>(coeffs.dim(3)); }
  int m() const { return static_cast<int>(coeffs.dim(4)); }
};

struct OutputSet {
  Tensor<float> outputs;  // [T, W, H, n, 3]
  int n() const { return static_cast<int>(outputs.dim(3)); }
  // Slot i as a [T, W, H, 3] tensor.
  Tensor<float> slot(int i) const;
};

// out[..., i*3+c] = sum_j coeffs[..., i*m+j] * layers[..., j*3+c]
// Throws std::invalid_argument on grid or m mismatch.
template <typename T>
Var<T> compose(const Var<T>& layers, const Var<T>& coeffs, int m);

OutputSet compose(const LayerSet& layers, const CoeffSet& coeffs);

struct DecoderConfig {
  int m = 4;
  int n = 4;
  // Channels of encoder levels 0..2 as seen by the decoder (skips) and of the
  // bottleneck input, which may include fused audio channels.
  std::array<int, 3> skip_channels{16, 32, 64};
  int bottleneck_channels = 128;
  // Output channels of the up-convolution stage that meets each skip level.
  std::array<int, 3> widths{16, 32, 64};
  std::array<ops::Triple, 4> strides{{{1, 2, 2}, {2, 2, 2}, {2, 2, 2}, {1, 2, 2}}};
  int top_channels = 16;
  ops::Triple top_kernel{1, 3, 3};
  // Initial value of every layer pixel, in (0,1).
  float initial_layer_level = 0.5f;
};

class LayerGenerator {
 public:
  struct Output {
    RVar layers;  // [N,T,W,H,m*3]
    RVar coeffs;  // [N,T,W,H,n*m]
  };

  // Registers parameters under "decoder/".
  LayerGenerator(const DecoderConfig& config, ParameterStore& store, std::mt19937_64& rng);

  // skips: levels 0..2, bottleneck: the deepest level, video: [N,T,W,H,3].
  Output operator()(const std::vector<RVar>& skips, const RVar& bottleneck, const RVar& video) const;

  const DecoderConfig& config() const { return config_; }

 private:
  DecoderConfig config_;
  UpConv3dLayer up3_, up2_, up1_, up0_;
  Conv3dLayer conv3_, conv2_, conv1_, conv0_;
  Conv3dLayer layer_head_, coeff_head_;
};

}  // namespace c3
