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

// On-disk formats.
//
// A tensor named by a stem path `dir/name` is stored as two files:
//   dir/name.f32  raw little-endian IEEE-754 float32 values, row-major
//   dir/name.hdr  text header, one `key value...` pair per line:
//                   c3-tensor 1
//                   dtype float32
//                   shape 8 32 32 3
//                   role v1
//                   attr.frame_rate 8
// Dataset manifests are JSON Lines: a header object {"kind":"manifest",...}
// followed by one object per record.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "c3/domain.hpp"
#include "c3/tensor.hpp"

namespace c3::io {

struct TensorFile {
  Tensor<float> tensor;
  std::string role;
  std::map<std::string, std::string> attributes;
};

void write_tensor(const std::filesystem::path& stem, const Tensor<float>& t, const std::string& role,
                  const std::map<std::string, std::string>& attributes = {});
TensorFile read_tensor(const std::filesystem::path& stem);

void write_video(const std::filesystem::path& stem, const Video& v, const std::string& role);
Video read_video(const std::filesystem::path& stem);

void write_audio(const std::filesystem::path& stem, const AudioClip& a, const std::string& role);
AudioClip read_audio(const std::filesystem::path& stem);

// Writes the sample's tensors under `dir` using `id` as file prefix and
// returns the manifest record with paths relative to `dir`.
ManifestRecord write_blend_sample(const std::filesystem::path& dir, const std::string& id,
                                  const BlendSample& s);
BlendSample read_blend_sample(const std::filesystem::path& dir, const ManifestRecord& r);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Checks ids are unique and every referenced tensor exists relative to `dir`.
std::vector<std::string> validate_manifest(const DatasetManifest& m, const std::filesystem::path& dir);

// 16-bit little-endian PCM WAV. Only mono files are accepted.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& a);

}  // namespace c3::io
