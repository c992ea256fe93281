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

// Sample sources, the ordered producer/consumer queue and batch assembly.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "c3/audio.hpp"
#include "c3/blendgen.hpp"
#include "c3/domain.hpp"

namespace c3 {

// Random access to a (possibly unbounded) set of samples. `get` must be a pure
// function of the id so that any number of workers yields the same stream.
struct SampleSource {
  Index count = -1;  // -1: unbounded
  std::function<BlendSample(Index)> get;
};

struct SpriteSourceOptions {
  std::uint64_t seed = 1;
  BlendMode mode = BlendMode::kTransparent;
  Index frames = 8;
  Index width = 32;
  Index height = 32;
  // When > width/height, clips are rendered at this size and cropped back.
  Index render_size = 0;
  bool random_crop = true;
  SpriteOptions sprite;
  Index count = -1;
};

// Salt mixed into the seed of held-out splits.
inline constexpr std::uint64_t kValidationSalt = 0x5eed'0f'7a11dull;

SampleSource sprite_source(const SpriteSourceOptions& options);
// Held-out sprites: same generator, seed range disjoint from training.
SampleSource validation_sprite_source(SpriteSourceOptions options);
// Samples listed in a manifest under `dir`.
SampleSource manifest_source(const std::filesystem::path& dir);

// Crops every tensor of the sample to [x0, x0+w) x [y0, y0+h).
BlendSample crop_sample(const BlendSample& s, Index x0, Index y0, Index w, Index h);

// Delivers samples first_id, first_id+1, ... in order while `workers`
// threads produce ahead, at most `capacity` samples in flight. With zero
// workers samples are produced on the consumer thread.
class OrderedSampleQueue {
 public:
  OrderedSampleQueue(SampleSource source, Index first_id, Index count, int workers, int capacity);
  ~OrderedSampleQueue();
  OrderedSampleQueue(const OrderedSampleQueue&) = delete;
  OrderedSampleQueue& operator=(const OrderedSampleQueue&) = delete;

  // Throws std::out_of_range once `count` samples were delivered, and
  // rethrows any producer exception.
  BlendSample pop();
  Index delivered() const { return next_ - first_; }

 private:
  void produce();

  SampleSource source_;
  Index first_, end_, next_;
  int capacity_;
  std::mutex mu_;
  std::condition_variable ready_, room_;
  std::map<Index, BlendSample> done_;
  Index claim_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::vector<std::thread> threads_;
};

struct Batch {
  Tensor<float> blended;  // [N,T,W,H,3]
  Tensor<float> v1;
  Tensor<float> v2;
  std::optional<Tensor<float>> spectrograms;  // [N,T_a,F]
};

// Stacks samples; spectrograms are computed when `with_audio` is set and
// every sample carries control audio.
Batch make_batch(std::span<const BlendSample> samples, bool with_audio, const StftParams& stft = {});

}  // namespace c3
