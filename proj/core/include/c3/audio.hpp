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

// Audio features, audio-visual fusion and the slot-scoring control head.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "c3/domain.hpp"
#include "c3/nn.hpp"

namespace c3 {

struct StftParams {
  int window = 400;
  int hop = 160;
  int fft_size = 512;
  float floor = 1e-6f;

  int bins() const { return fft_size / 2 + 1; }
  // Frames produced for `samples` input samples; short clips yield one frame.
  Index frames(Index samples) const;
};

struct Spectrogram {
  Tensor<float> values;  // [T_a, F], log(|X| + floor)
  StftParams params;
};

// Hann-windowed STFT magnitude, then log(magnitude + floor). Clips shorter
// than one window are zero-padded to a single frame. Throws
// std::invalid_argument on an empty clip.
Spectrogram compute_log_spectrogram(const AudioClip& a, const StftParams& params = {});

struct AudioNetConfig {
  std::array<int, 4> channels{8, 16, 32, 32};
  float input_scale = 0.1f;
};

// Conv + max-pool blocks over the spectrogram image. The input carries a
// second channel weighted by the normalised frequency coordinate so that the
// frequency-pooled output still depends on where the energy lies.
class AudioNet {
 public:
  // Registers parameters under "audio/".
  AudioNet(const AudioNetConfig& config, ParameterStore& store, std::mt19937_64& rng);

  // spectrograms: [N, T_a, F] -> [N, T_a', F', C].
  RVar operator()(const RVar& spectrograms) const;

  int out_channels() const { return config_.channels.back(); }
  // [T_a', F'] for a [T_a, F] spectrogram.
  std::array<Index, 2> out_shape(Index ta, Index f) const;
  const AudioNetConfig& config() const { return config_; }

 private:
  AudioNetConfig config_;
  std::vector<Conv3dLayer> blocks_;
};

// Index of the source step nearest to the centre of target step t.
Index nearest_centre_index(Index t, Index target_len, Index source_len);

// visual [N,T,W,H,Cv], audio [N,T_a',F',Ca] -> [N,T,W,H,Cv+Ca]. Audio is
// mean-pooled over frequency, resampled in time, broadcast over space and
// appended after the visual channels.
template <typename T>
Var<T> fuse(const Var<T>& visual, const Var<T>& audio);

// Per-slot colour statistics (channel mean and max) of outputs [N,T,W,H,n*3]
// -> [N, n, 6]. Plain values: the result carries no gradient.
Tensor<float> slot_embeddings(const Tensor<float>& outputs, int n);

struct ControlHeadConfig {
  int hidden = 64;
  int embedding = 6;
};

class ControlHead {
 public:
  // Registers parameters under "control/".
  ControlHead(const ControlHeadConfig& config, int pooled_channels, ParameterStore& store, std::mt19937_64& rng);

  // pooled [N, C], embeddings [N, n, E] -> scores [N, n]. One shared
  // perceptron scores every slot.
  RVar operator()(const RVar& pooled, const RVar& embeddings) const;

 private:
  ControlHeadConfig config_;
  int pooled_channels_;
  LinearLayer hidden_, out_;
};

// Argmin; ties resolve to the lowest index. Throws on empty input.
int select_slot(std::span<const float> scores);

}  // namespace c3
