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

#include "c3/data.hpp"

#include <algorithm>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "c3/io.hpp"

namespace c3 {
namespace {

Tensor<float> crop_grid(const Tensor<float>& t, Index x0, Index y0, Index w, Index h) {
  const Index frames = t.dim(0), sw = t.dim(1), sh = t.dim(2);
  const Index c = t.rank() == 4 ? t.dim(3) : 1;
  Shape shape{frames, w, h};
  if (t.rank() == 4) shape.push_back(c);
  Tensor<float> out(shape);
  for (Index f = 0; f < frames; ++f)
    for (Index x = 0; x < w; ++x)
      for (Index y = 0; y < h; ++y)
        for (Index k = 0; k < c; ++k) {
          out[((f * w + x) * h + y) * c + k] = t[((f * sw + x0 + x) * sh + y0 + y) * c + k];
        }
  return out;
}

}  // namespace

BlendSample crop_sample(const BlendSample& s, Index x0, Index y0, Index w, Index h) {
  if (x0 < 0 || y0 < 0 || x0 + w > s.blended.width() || y0 + h > s.blended.height()) {
    throw std::invalid_argument("crop_sample: window exceeds the " + std::to_string(s.blended.width()) + "x" +
                                std::to_string(s.blended.height()) + " clip");
  }
  BlendSample out = s;
  out.v1.frames = crop_grid(s.v1.frames, x0, y0, w, h);
  out.v2.frames = crop_grid(s.v2.frames, x0, y0, w, h);
  out.blended.frames = crop_grid(s.blended.frames, x0, y0, w, h);
  out.alpha = crop_grid(s.alpha, x0, y0, w, h);
  return out;
}

SampleSource sprite_source(const SpriteSourceOptions& o) {
  SampleSource src;
  src.count = o.count;
  src.get = [o](Index id) {
    const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(id));
    const Index rw = std::max(o.render_size, o.width);
    const Index rh = std::max(o.render_size, o.height);
    BlendSample s = gen_sprite_sample(seed, o.mode, o.frames, rw, rh, o.sprite);
    if (rw == o.width && rh == o.height) return s;
    Index x0 = (rw - o.width) / 2, y0 = (rh - o.height) / 2;
    if (o.random_crop) {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
      x0 = std::uniform_int_distribution<Index>(0, rw - o.width)(rng);
      y0 = std::uniform_int_distribution<Index>(0, rh - o.height)(rng);
    }
    return crop_sample(s, x0, y0, o.width, o.height);
  };
  return src;
}

SampleSource validation_sprite_source(SpriteSourceOptions options) {
  options.seed = derive_seed(options.seed ^ kValidationSalt, 0);
  options.random_crop = false;
  return sprite_source(options);
}

SampleSource manifest_source(const std::filesystem::path& dir) {
  auto manifest = std::make_shared<DatasetManifest>(io::read_manifest(dir / "manifest.jsonl"));
  const auto problems = io::validate_manifest(*manifest, dir);
  if (!problems.empty()) throw std::runtime_error("invalid manifest in " + dir.string() + ": " + problems.front());
  SampleSource src;
  src.count = static_cast<Index>(manifest->records.size());
  src.get = [manifest, dir](Index id) {
    if (id < 0 || id >= static_cast<Index>(manifest->records.size())) {
      throw std::out_of_range("manifest sample " + std::to_string(id) + " out of range");
    }
    return io::read_blend_sample(dir, manifest->records[static_cast<std::size_t>(id)]);
  };
  return src;
}

OrderedSampleQueue::OrderedSampleQueue(SampleSource source, Index first_id, Index count, int workers, int capacity)
    : source_(std::move(source)), first_(first_id), end_(first_id + count), next_(first_id),
      capacity_(std::max(capacity, 1)), claim_(first_id) {
  if (source_.count >= 0 && end_ > source_.count) {
    throw std::invalid_argument("sample queue: requested ids up to " + std::to_string(end_) + " from a source of " +
                                std::to_string(source_.count));
  }
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { produce(); });
}

OrderedSampleQueue::~OrderedSampleQueue() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  room_.notify_all();
  ready_.notify_all();
  for (auto& t : threads_) t.join();
}

void OrderedSampleQueue::produce() {
  for (;;) {
    Index id;
    {
      std::unique_lock lock(mu_);
      room_.wait(lock, [&] { return stop_ || claim_ >= end_ || claim_ < next_ + capacity_; });
      if (stop_ || claim_ >= end_) return;
      id = claim_++;
    }
    try {
      BlendSample s = source_.get(id);
      std::lock_guard lock(mu_);
      done_.emplace(id, std::move(s));
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
    ready_.notify_all();
  }
}

BlendSample OrderedSampleQueue::pop() {
  if (next_ >= end_) throw std::out_of_range("sample queue exhausted");
  if (threads_.empty()) return source_.get(next_++);
  std::unique_lock lock(mu_);
  ready_.wait(lock, [&] { return error_ || done_.count(next_); });
  if (error_) std::rethrow_exception(error_);
  auto node = done_.extract(next_);
  ++next_;
  lock.unlock();
  room_.notify_all();
  return std::move(node.mapped());
}

Batch make_batch(std::span<const BlendSample> samples, bool with_audio, const StftParams& stft) {
  if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
  const Shape& s0 = samples[0].blended.frames.shape();
  const Index n = static_cast<Index>(samples.size());
  const Index per = samples[0].blended.frames.size();
  Batch b;
  b.blended = Tensor<float>({n, s0[0], s0[1], s0[2], s0[3]});
  b.v1 = Tensor<float>(b.blended.shape());
  b.v2 = Tensor<float>(b.blended.shape());
  for (Index i = 0; i < n; ++i) {
    const BlendSample& s = samples[static_cast<std::size_t>(i)];
    if (s.blended.frames.shape() != s0 || s.v1.frames.shape() != s0 || s.v2.frames.shape() != s0) {
      throw std::invalid_argument("make_batch: sample " + std::to_string(i) + " has shape " +
                                  shape_string(s.blended.frames.shape()) + ", batch uses " + shape_string(s0));
    }
    std::copy_n(s.blended.frames.data(), per, b.blended.data() + i * per);
    std::copy_n(s.v1.frames.data(), per, b.v1.data() + i * per);
    std::copy_n(s.v2.frames.data(), per, b.v2.data() + i * per);
  }
  if (with_audio) {
    std::vector<Spectrogram> specs;
    for (const auto& s : samples) {
      if (!s.audio1) throw std::invalid_argument("make_batch: sample lacks control audio");
      specs.push_back(compute_log_spectrogram(*s.audio1, stft));
    }
    const Shape& a0 = specs[0].values.shape();
    Tensor<float> out({n, a0[0], a0[1]});
    for (Index i = 0; i < n; ++i) {
      const auto& v = specs[static_cast<std::size_t>(i)].values;
      if (v.shape() != a0) throw std::invalid_argument("make_batch: control audio lengths differ");
      std::copy_n(v.data(), v.size(), out.data() + i * v.size());
    }
    b.spectrograms = std::move(out);
  }
  return b;
}

}  // namespace c3
