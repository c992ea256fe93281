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

// The full decomposition network: gated encoder, optional audio branch,
// layer generator, composition and (for internal control) the slot scorer.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "c3/audio.hpp"
#include "c3/decoder.hpp"
#include "c3/encoder.hpp"

namespace c3 {

enum class ModelVariant { kC2, kC3Det, kC3Internal };

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);
inline bool has_audio(ModelVariant v) { return v != ModelVariant::kC2; }

struct ModelConfig {
  ModelVariant variant = ModelVariant::kC2;
  int m = 4;
  int n = 4;
  EncoderConfig encoder;
  AudioNetConfig audio;
  ControlHeadConfig head;
  std::array<int, 3> decoder_widths{16, 32, 64};
  int decoder_top_channels = 16;
  ops::Triple decoder_top_kernel{1, 3, 3};
  // Sprite clips are dark; layers start near their mean brightness.
  float decoder_initial_level = 0.12f;
  // Also append audio features to every skip level.
  bool audio_at_skips = false;
  StftParams stft;
  std::uint64_t init_seed = 1;

  // Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

class C3Model {
 public:
  struct Forward {
    RVar masks;      // [N,T,W,H,m]
    std::vector<RVar> skips;
    RVar bottleneck;
    RVar fused;      // bottleneck with audio channels (== bottleneck for C2)
    RVar audio;      // [N,T_a',F',C] or empty
    RVar layers;     // [N,T,W,H,m*3]
    RVar coeffs;     // [N,T,W,H,n*m]
    RVar outputs;    // [N,T,W,H,n*3]
    RVar scores;     // [N,n] for internal control, else empty
  };

  explicit C3Model(const ModelConfig& config);
  C3Model(const C3Model&) = delete;
  C3Model& operator=(const C3Model&) = delete;

  // video [N,T,W,H,3]; spectrograms [N,T_a,F] are required iff the variant
  // uses audio.
  Forward forward(const RVar& video, const std::optional<RVar>& spectrograms = std::nullopt) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  // `dir/model.json` plus the parameter store layout.
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<C3Model> load(const std::filesystem::path& dir);
  // Loads parameters into this model; throws naming mismatched parameters.
  void load_parameters(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<AudioNet> audio_;
  std::unique_ptr<LayerGenerator> decoder_;
  std::unique_ptr<ControlHead> head_;
};

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace c3
