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

// PNG frame strips of a decomposition.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c3/harness.hpp"

namespace c3 {

// 8-bit RGB image, rows of `width` pixels.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

// round(255 * clamp(v, 0, 1)).
std::uint8_t to_byte(float v);

// Frames [T,W,H,3] laid side by side; x runs along W, rows along H.
Image frame_strip(const Tensor<float>& frames);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

struct ExportReport {
  std::vector<std::filesystem::path> files;
  int term_panels = 0;  // beta_ij * L_j panels
};

// Writes input.png, output_<i>.png, layer_<j>.png and term_<i>_<j>.png.
ExportReport export_visuals(const BlendSample& sample, const Decomposition& d, const std::filesystem::path& dir);

}  // namespace c3
