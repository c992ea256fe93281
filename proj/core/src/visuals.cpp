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

#include "c3/visuals.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace c3 {

std::uint8_t to_byte(float v) {
  if (!(v > 0.0f)) return 0;
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

Image frame_strip(const Tensor<float>& frames) {
  if (frames.rank() != 4 || frames.dim(3) != 3) {
    throw std::invalid_argument("frame_strip: expected [T,W,H,3], got " + shape_string(frames.shape()));
  }
  const Index t = frames.dim(0), w = frames.dim(1), h = frames.dim(2);
  Image img;
  img.width = static_cast<int>(t * w);
  img.height = static_cast<int>(h);
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3);
  for (Index f = 0; f < t; ++f)
    for (Index x = 0; x < w; ++x)
      for (Index y = 0; y < h; ++y)
        for (Index c = 0; c < 3; ++c) {
          const std::size_t dst = (static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) +
                                   static_cast<std::size_t>(f * w + x)) * 3 + static_cast<std::size_t>(c);
          img.pixels[dst] = to_byte(frames[((f * w + x) * h + y) * 3 + c]);
        }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw std::invalid_argument("write_png: pixel buffer does not match the image size");
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw std::runtime_error("cannot write " + path.string() + ": " + msg);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw std::runtime_error("cannot read " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw std::runtime_error("cannot decode " + path.string() + ": " + msg);
  }
  return img;
}

ExportReport export_visuals(const BlendSample& sample, const Decomposition& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExportReport report;
  auto emit = [&](const std::string& name, const Tensor<float>& frames) {
    const auto path = dir / name;
    write_png(path, frame_strip(frames));
    report.files.push_back(path);
  };
  emit("input.png", sample.blended.frames);
  const int n = d.outputs.n();
  for (int i = 0; i < n; ++i) emit("output_" + std::to_string(i) + ".png", d.outputs.slot(i));
  const int m = d.layers.m();
  const Shape& ls = d.layers.layers.shape();
  const Index pixels = ls[0] * ls[1] * ls[2];
  for (int j = 0; j < m; ++j) {
    Tensor<float> layer({ls[0], ls[1], ls[2], 3});
    for (Index p = 0; p < pixels; ++p)
      for (Index c = 0; c < 3; ++c) layer[p * 3 + c] = d.layers.layers[(p * m + j) * 3 + c];
    emit("layer_" + std::to_string(j) + ".png", layer);
    for (int i = 0; i < n; ++i) {
      Tensor<float> term({ls[0], ls[1], ls[2], 3});
      for (Index p = 0; p < pixels; ++p) {
        const float beta = d.coeffs.coeffs[(p * n + i) * m + j];
        for (Index c = 0; c < 3; ++c) term[p * 3 + c] = beta * layer[p * 3 + c];
      }
      emit("term_" + std::to_string(i) + "_" + std::to_string(j) + ".png", term);
      ++report.term_panels;
    }
  }
  return report;
}

}  // namespace c3
