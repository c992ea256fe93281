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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c3/tensor.hpp"

namespace c3 {

// Dense RGB clip, frames [T, W, H, 3] with values in [0, 1].
struct Video {
  Tensor<float> frames;
  double frame_rate = 8.0;

  Index num_frames() const { return frames.rank() > 0 ? frames.dim(0) : 0; }
  Index width() const { return frames.rank() > 1 ? frames.dim(1) : 0; }
  Index height() const { return frames.rank() > 2 ? frames.dim(2) : 0; }
  double duration() const { return static_cast<double>(num_frames()) / frame_rate; }

  static Video zeros(Index t, Index w, Index h, double frame_rate = 8.0) {
    return Video{Tensor<float>(Shape{t, w, h, 3}), frame_rate};
  }
};

// Monaural audio with samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  double sample_rate = 16000.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class BlendMode { kTransparent, kOcclusion };

std::string to_string(BlendMode mode);
BlendMode blend_mode_from_string(const std::string& name);

// One training instance with its ground-truth decomposition.
struct BlendSample {
  Video v1;
  Video v2;
  Tensor<float> alpha;  // [T, W, H]
  Video blended;
  std::optional<AudioClip> audio1;
  BlendMode blend_mode = BlendMode::kTransparent;
  std::map<std::string, std::string> metadata;
};

struct ManifestRecord {
  std::string id;
  std::string v1_path;
  std::string v2_path;
  std::string alpha_path;
  std::string blended_path;
  std::string audio_path;  // empty when the sample has no control audio
  BlendMode blend_mode = BlendMode::kTransparent;
  std::map<std::string, std::string> metadata;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::uint64_t seed = 0;
};

// Returns one message per violated Video invariant; empty means valid.
std::vector<std::string> validate_video(const Video& v);

// Returns violations of the BlendSample invariants (reconstruction identity,
// blend-mode alpha constraints, shape agreement, audio duration).
std::vector<std::string> validate_blend_sample(const BlendSample& s, double tolerance = 1e-6);

}  // namespace c3
