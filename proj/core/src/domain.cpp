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

#include "c3/domain.hpp"

#include <cmath>
#include <stdexcept>

namespace c3 {

std::string to_string(BlendMode mode) {
  return mode == BlendMode::kTransparent ? "transparent" : "occlusion";
}

BlendMode blend_mode_from_string(const std::string& name) {
  if (name == "transparent") return BlendMode::kTransparent;
  if (name == "occlusion") return BlendMode::kOcclusion;
  throw std::invalid_argument("unknown blend mode '" + name + "'");
}

std::vector<std::string> validate_video(const Video& v) {
  std::vector<std::string> out;
  const Tensor<float>& f = v.frames;
  if (f.rank() != 4 || f.dim(3) != 3) {
    out.push_back("shape must be [T,W,H,3]");
    return out;
  }
  if (f.dim(0) < 1) out.push_back("T ≥ 1 violated");
  if (f.dim(1) < 8) out.push_back("W ≥ 8 violated");
  if (f.dim(2) < 8) out.push_back("H ≥ 8 violated");
  for (float x : f.values()) {
    if (!(x >= 0.0f && x <= 1.0f)) {
      out.push_back("values out of range");
      break;
    }
  }
  if (!(v.frame_rate > 0.0)) out.push_back("frame_rate must be positive");
  return out;
}

std::vector<std::string> validate_blend_sample(const BlendSample& s, double tolerance) {
  std::vector<std::string> out;
  for (const Video* v : {&s.v1, &s.v2, &s.blended}) {
    for (auto& msg : validate_video(*v)) out.push_back(msg);
  }
  if (!out.empty()) return out;
  const Shape& vs = s.v1.frames.shape();
  if (s.v2.frames.shape() != vs || s.blended.frames.shape() != vs) {
    out.push_back("v1, v2 and blended shapes differ");
    return out;
  }
  if (s.alpha.shape() != Shape{vs[0], vs[1], vs[2]}) {
    out.push_back("alpha shape does not match video");
    return out;
  }
  const Index voxels = s.alpha.size();
  bool range_ok = true, mode_ok = true, recon_ok = true;
  for (Index i = 0; i < voxels; ++i) {
    const float a = s.alpha[i];
    if (!(a >= 0.0f && a <= 1.0f)) range_ok = false;
    if (s.blend_mode == BlendMode::kTransparent && a != 0.5f) mode_ok = false;
    if (s.blend_mode == BlendMode::kOcclusion && a != 0.0f && a != 1.0f) mode_ok = false;
    for (Index c = 0; c < 3; ++c) {
      const double expect = static_cast<double>(a) * s.v1.frames[i * 3 + c] +
                            (1.0 - static_cast<double>(a)) * s.v2.frames[i * 3 + c];
      if (std::abs(expect - s.blended.frames[i * 3 + c]) > tolerance) recon_ok = false;
    }
  }
  if (!range_ok) out.push_back("alpha out of [0,1]");
  if (!mode_ok) {
    out.push_back(s.blend_mode == BlendMode::kTransparent ? "transparent alpha must be 0.5 everywhere"
                                                          : "occlusion alpha must be binary");
  }
  if (!recon_ok) out.push_back("blended != alpha*v1 + (1-alpha)*v2");
  if (s.audio1) {
    if (std::abs(s.audio1->duration() - s.v1.duration()) > 1.0 / s.v1.frame_rate) {
      out.push_back("audio duration differs from video duration by more than one frame");
    }
  }
  return out;
}

}  // namespace c3
