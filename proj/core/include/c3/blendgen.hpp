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

// Ground-truthed training data: alpha masks, supervoxels, alpha blending and
// the procedural sprites-with-tones corpus.

#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "c3/domain.hpp"

namespace c3 {

struct SupervoxelLabels {
  Tensor<std::int32_t> labels;  // [T, W, H], values in [0, num_segments)
  int num_segments = 0;
};

struct SlicOptions {
  int target_segments = 12;
  double compactness = 0.1;
  double temporal_scale = 1.0;
  int max_iterations = 10;
};

// Alpha of every entry 0.5.
Tensor<float> make_transparent_alpha(Index t, Index w, Index h);

// SLIC-style k-means over (temporal_scale*t, x, y) / S and rgb / compactness,
// S being the grid interval for `target_segments` centres. Centres are seeded
// on an exact grid of `target_segments` cells; empty clusters are dropped and
// labels are renumbered in scan order, so num_segments may be smaller.
// Throws std::invalid_argument if target_segments < 1 or exceeds the voxel count.
SupervoxelLabels extract_supervoxels(const Video& v, int target_segments, double compactness,
                                     double temporal_scale, int max_iterations = 10);

// 1 where labels == chosen, 0 elsewhere.
Tensor<float> make_occlusion_alpha(const SupervoxelLabels& labels, int chosen);

// alpha*v1 + (1-alpha)*v2 with alpha [T,W,H] broadcast over colour channels.
Video blend(const Video& v1, const Video& v2, const Tensor<float>& alpha);

// Uniform over segments covering 5%..50% of the clip; uniform over all
// segments when none qualifies.
int choose_occlusion_segment(const SupervoxelLabels& labels, std::mt19937_64& rng);

enum class SpriteClass : int { kDisk = 0, kSquare = 1, kTriangle = 2, kCross = 3 };
inline constexpr int kNumSpriteClasses = 4;

// Deterministic class properties.
double tone_frequency(SpriteClass c);
std::array<float, 3> base_color(SpriteClass c);
const char* sprite_class_name(SpriteClass c);

struct SpriteSceneSpec {
  SpriteClass sprite_class = SpriteClass::kDisk;
  std::array<float, 3> color{};
  std::array<float, 3> background{};
  double radius = 6.0;  // pixels
  // Centre at frame t: start + velocity*t + wobble_amp*sin(wobble_freq*t + wobble_phase),
  // reflected into the frame.
  std::array<double, 2> start{};
  std::array<double, 2> velocity{};
  std::array<double, 2> wobble_amp{};
  double wobble_freq = 1.0;
  double wobble_phase = 0.0;
  double tone_phase = 0.0;

  double tone_frequency() const { return c3::tone_frequency(sprite_class); }
};

struct SpriteOptions {
  double frame_rate = 8.0;
  double sample_rate = 16000.0;
  SlicOptions slic{};
};

SpriteSceneSpec random_sprite_scene(std::mt19937_64& rng, SpriteClass c, Index w, Index h);

// Per-frame sprite centre, after reflection into [radius, size-radius].
std::array<double, 2> sprite_position(const SpriteSceneSpec& s, double t, Index w, Index h);

Video render_sprite_scene(const SpriteSceneSpec& s, Index t, Index w, Index h, double frame_rate);

// Pure class tone whose per-frame amplitude follows the sprite speed; the
// clip lasts exactly t / frame_rate seconds.
AudioClip render_sprite_audio(const SpriteSceneSpec& s, Index t, Index w, Index h, double frame_rate,
                              double sample_rate);

// Deterministic in `seed`. v1 and v2 show sprites of different classes and
// audio1 is the tone track of v1.
BlendSample gen_sprite_sample(std::uint64_t seed, BlendMode mode, Index t, Index w, Index h,
                              const SpriteOptions& options = {});

// Independent per-sample substream seed.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t sample_id);

}  // namespace c3
