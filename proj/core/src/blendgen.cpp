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

#include "c3/blendgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace c3 {

Tensor<float> make_transparent_alpha(Index t, Index w, Index h) {
  if (t < 1 || w < 1 || h < 1) throw std::invalid_argument("alpha dims must be positive");
  return Tensor<float>(Shape{t, w, h}, 0.5f);
}

namespace {

// Exact factorisation of k into a (t, x, y) grid that fits the clip and has
// the most cubic cells; ties prefer more cells along x, then y.
bool best_grid(int k, const double extent[3], const Index dims[3], std::array<int, 3>& grid) {
  double best_ratio = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int gt = 1; gt <= k; ++gt) {
    if (k % gt || gt > dims[0]) continue;
    const int rest = k / gt;
    for (int gx = rest; gx >= 1; --gx) {
      if (rest % gx || gx > dims[1]) continue;
      const int gy = rest / gx;
      if (gy > dims[2]) continue;
      const double cell[3] = {extent[0] / gt, extent[1] / gx, extent[2] / gy};
      double lo = cell[0], hi = cell[0];
      for (double c : cell) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      const double ratio = hi / std::max(lo, 1e-12);
      const std::array<int, 3> cand{gt, gx, gy};
      const bool better = ratio < best_ratio - 1e-12 ||
                          (std::abs(ratio - best_ratio) <= 1e-12 &&
                           std::tie(cand[1], cand[2]) > std::tie(grid[1], grid[2]));
      if (!found || better) {
        best_ratio = ratio;
        grid = cand;
        found = true;
      }
    }
  }
  return found;
}

}  // namespace

SupervoxelLabels extract_supervoxels(const Video& v, int target_segments, double compactness,
                                     double temporal_scale, int max_iterations) {
  const Index t = v.num_frames(), w = v.width(), h = v.height();
  const Index voxels = t * w * h;
  if (target_segments < 1 || target_segments > voxels) {
    throw std::invalid_argument("target segment count " + std::to_string(target_segments) +
                                " must be in [1, " + std::to_string(voxels) + "]");
  }
  if (!(compactness > 0.0)) throw std::invalid_argument("compactness must be positive");

  const int k = target_segments;
  const double step = std::cbrt(static_cast<double>(voxels) / k);
  constexpr int kDims = 6;
  std::vector<double> feat(static_cast<std::size_t>(voxels * kDims));
  for (Index ti = 0; ti < t; ++ti)
    for (Index xi = 0; xi < w; ++xi)
      for (Index yi = 0; yi < h; ++yi) {
        const Index i = (ti * w + xi) * h + yi;
        double* f = feat.data() + i * kDims;
        f[0] = temporal_scale * static_cast<double>(ti) / step;
        f[1] = static_cast<double>(xi) / step;
        f[2] = static_cast<double>(yi) / step;
        for (int c = 0; c < 3; ++c) f[3 + c] = v.frames[i * 3 + c] / compactness;
      }

  // Seeds.
  std::vector<double> centers;
  const double extent[3] = {temporal_scale * static_cast<double>(t), static_cast<double>(w),
                            static_cast<double>(h)};
  const Index dims[3] = {t, w, h};
  std::array<int, 3> grid{1, 1, 1};
  if (best_grid(k, extent, dims, grid)) {
    for (int a = 0; a < grid[0]; ++a)
      for (int b = 0; b < grid[1]; ++b)
        for (int c = 0; c < grid[2]; ++c) {
          const Index ti = static_cast<Index>((a + 0.5) * static_cast<double>(t) / grid[0]);
          const Index xi = static_cast<Index>((b + 0.5) * static_cast<double>(w) / grid[1]);
          const Index yi = static_cast<Index>((c + 0.5) * static_cast<double>(h) / grid[2]);
          const double* f = feat.data() + ((ti * w + xi) * h + yi) * kDims;
          centers.insert(centers.end(), f, f + kDims);
        }
  } else {
    // No exact grid fits the clip: evenly spaced voxels in scan order.
    for (int c = 0; c < k; ++c) {
      const Index i = static_cast<Index>((c + 0.5) * static_cast<double>(voxels) / k);
      const double* f = feat.data() + i * kDims;
      centers.insert(centers.end(), f, f + kDims);
    }
  }

  std::vector<std::int32_t> label(static_cast<std::size_t>(voxels), -1);
  for (int iter = 0; iter < std::max(1, max_iterations); ++iter) {
    bool changed = false;
    for (Index i = 0; i < voxels; ++i) {
      const double* f = feat.data() + i * kDims;
      double best = std::numeric_limits<double>::infinity();
      std::int32_t arg = 0;
      for (int c = 0; c < k; ++c) {
        const double* cc = centers.data() + c * kDims;
        double d = 0;
        for (int j = 0; j < kDims; ++j) d += (f[j] - cc[j]) * (f[j] - cc[j]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (label[static_cast<std::size_t>(i)] != arg) {
        label[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> acc(centers.size(), 0.0);
    std::vector<Index> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < voxels; ++i) {
      const int c = label[static_cast<std::size_t>(i)];
      ++count[static_cast<std::size_t>(c)];
      for (int j = 0; j < kDims; ++j) acc[static_cast<std::size_t>(c * kDims + j)] += feat[static_cast<std::size_t>(i * kDims + j)];
    }
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] == 0) continue;
      for (int j = 0; j < kDims; ++j)
        centers[static_cast<std::size_t>(c * kDims + j)] =
            acc[static_cast<std::size_t>(c * kDims + j)] / static_cast<double>(count[static_cast<std::size_t>(c)]);
    }
  }

  // Canonical renumbering in scan order.
  std::vector<std::int32_t> remap(static_cast<std::size_t>(k), -1);
  SupervoxelLabels out;
  out.labels = Tensor<std::int32_t>(Shape{t, w, h});
  std::int32_t next = 0;
  for (Index i = 0; i < voxels; ++i) {
    auto& r = remap[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
    if (r < 0) r = next++;
    out.labels[i] = r;
  }
  out.num_segments = next;
  return out;
}

Tensor<float> make_occlusion_alpha(const SupervoxelLabels& labels, int chosen) {
  if (chosen < 0 || chosen >= labels.num_segments) {
    throw std::invalid_argument("chosen segment " + std::to_string(chosen) + " not in [0, " +
                                std::to_string(labels.num_segments) + ")");
  }
  Tensor<float> alpha(labels.labels.shape());
  for (Index i = 0; i < alpha.size(); ++i) alpha[i] = labels.labels[i] == chosen ? 1.0f : 0.0f;
  return alpha;
}

Video blend(const Video& v1, const Video& v2, const Tensor<float>& alpha) {
  const Shape& s = v1.frames.shape();
  if (s.size() != 4 || s[3] != 3) throw std::invalid_argument("blend: v1 must be [T,W,H,3]");
  if (v2.frames.shape() != s) {
    throw std::invalid_argument("blend: v1 " + shape_string(s) + " and v2 " +
                                shape_string(v2.frames.shape()) + " differ");
  }
  if (alpha.shape() != Shape{s[0], s[1], s[2]}) {
    throw std::invalid_argument("blend: alpha " + shape_string(alpha.shape()) +
                                " does not match video " + shape_string(s));
  }
  Video out{Tensor<float>(s), v1.frame_rate};
  for (Index i = 0; i < alpha.size(); ++i) {
    const float a = alpha[i];
    for (Index c = 0; c < 3; ++c) {
      const Index j = i * 3 + c;
      out.frames[j] = a * v1.frames[j] + (1.0f - a) * v2.frames[j];
    }
  }
  return out;
}

int choose_occlusion_segment(const SupervoxelLabels& labels, std::mt19937_64& rng) {
  if (labels.num_segments < 1) throw std::invalid_argument("no segments to choose from");
  std::vector<Index> volume(static_cast<std::size_t>(labels.num_segments), 0);
  for (Index i = 0; i < labels.labels.size(); ++i) ++volume[static_cast<std::size_t>(labels.labels[i])];
  const double total = static_cast<double>(labels.labels.size());
  std::vector<int> eligible;
  for (int s = 0; s < labels.num_segments; ++s) {
    const double frac = static_cast<double>(volume[static_cast<std::size_t>(s)]) / total;
    if (frac >= 0.05 && frac <= 0.5) eligible.push_back(s);
  }
  if (eligible.empty()) {
    for (int s = 0; s < labels.num_segments; ++s) eligible.push_back(s);
  }
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  return eligible[pick(rng)];
}

double tone_frequency(SpriteClass c) {
  // Multiples of 375 Hz land exactly on 512-point FFT bins at 16 kHz.
  static constexpr double kTones[kNumSpriteClasses] = {375.0, 750.0, 1500.0, 3000.0};
  return kTones[static_cast<int>(c)];
}

std::array<float, 3> base_color(SpriteClass c) {
  static constexpr std::array<float, 3> kColors[kNumSpriteClasses] = {
      {0.95f, 0.25f, 0.20f}, {0.20f, 0.85f, 0.30f}, {0.25f, 0.40f, 0.95f}, {0.95f, 0.85f, 0.20f}};
  return kColors[static_cast<int>(c)];
}

const char* sprite_class_name(SpriteClass c) {
  static constexpr const char* kNames[kNumSpriteClasses] = {"disk", "square", "triangle", "cross"};
  return kNames[static_cast<int>(c)];
}

SpriteSceneSpec random_sprite_scene(std::mt19937_64& rng, SpriteClass c, Index w, Index h) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SpriteSceneSpec s;
  s.sprite_class = c;
  const auto base = base_color(c);
  for (int i = 0; i < 3; ++i) {
    s.color[static_cast<std::size_t>(i)] = std::clamp(base[static_cast<std::size_t>(i)] + static_cast<float>(0.1 * u01(rng) - 0.05), 0.0f, 1.0f);
    s.background[static_cast<std::size_t>(i)] = static_cast<float>(0.15 * u01(rng));
  }
  const double side = static_cast<double>(std::min(w, h));
  s.radius = side * (0.18 + 0.08 * u01(rng));
  s.start = {s.radius + u01(rng) * (static_cast<double>(w) - 2 * s.radius),
             s.radius + u01(rng) * (static_cast<double>(h) - 2 * s.radius)};
  const double max_speed = 0.08 * side;
  for (int i = 0; i < 2; ++i) {
    s.velocity[static_cast<std::size_t>(i)] = max_speed * (2.0 * u01(rng) - 1.0);
    s.wobble_amp[static_cast<std::size_t>(i)] = 0.08 * side * u01(rng);
  }
  s.wobble_freq = 0.4 + 0.8 * u01(rng);
  s.wobble_phase = 2.0 * std::numbers::pi * u01(rng);
  s.tone_phase = 2.0 * std::numbers::pi * u01(rng);
  return s;
}

namespace {

double reflect(double x, double lo, double hi) {
  if (hi <= lo) return 0.5 * (lo + hi);
  const double span = hi - lo;
  double y = std::fmod(x - lo, 2.0 * span);
  if (y < 0) y += 2.0 * span;
  return lo + (y <= span ? y : 2.0 * span - y);
}

bool inside(SpriteClass c, double dx, double dy, double r) {
  switch (c) {
    case SpriteClass::kDisk:
      return dx * dx + dy * dy <= r * r;
    case SpriteClass::kSquare:
      return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case SpriteClass::kTriangle:
      // Apex at -r along y, base at +0.7r.
      return dy <= 0.7 * r && dy >= -r && std::abs(dx) <= 0.5 * (dy + r) * 1.1;
    case SpriteClass::kCross:
      return (std::abs(dx) <= 0.35 * r && std::abs(dy) <= r) ||
             (std::abs(dy) <= 0.35 * r && std::abs(dx) <= r);
  }
  return false;
}

}  // namespace

std::array<double, 2> sprite_position(const SpriteSceneSpec& s, double t, Index w, Index h) {
  const double size[2] = {static_cast<double>(w), static_cast<double>(h)};
  std::array<double, 2> p{};
  for (int i = 0; i < 2; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double raw = s.start[k] + s.velocity[k] * t +
                       s.wobble_amp[k] * std::sin(s.wobble_freq * t + s.wobble_phase + i);
    p[k] = reflect(raw, s.radius, size[i] - s.radius);
  }
  return p;
}

Video render_sprite_scene(const SpriteSceneSpec& s, Index t, Index w, Index h, double frame_rate) {
  Video v{Tensor<float>(Shape{t, w, h, 3}), frame_rate};
  for (Index ti = 0; ti < t; ++ti) {
    const auto p = sprite_position(s, static_cast<double>(ti), w, h);
    for (Index x = 0; x < w; ++x)
      for (Index y = 0; y < h; ++y) {
        const double dx = static_cast<double>(x) + 0.5 - p[0];
        const double dy = static_cast<double>(y) + 0.5 - p[1];
        const auto& col = inside(s.sprite_class, dx, dy, s.radius) ? s.color : s.background;
        float* px = v.frames.data() + ((ti * w + x) * h + y) * 3;
        for (int c = 0; c < 3; ++c) px[c] = col[static_cast<std::size_t>(c)];
      }
  }
  return v;
}

AudioClip render_sprite_audio(const SpriteSceneSpec& s, Index t, Index w, Index h, double frame_rate,
                              double sample_rate) {
  // Per-frame speed -> amplitude in [0.2, 0.8].
  std::vector<double> amp(static_cast<std::size_t>(t));
  const double ref_speed = 0.16 * static_cast<double>(std::min(w, h));
  for (Index ti = 0; ti < t; ++ti) {
    const auto a = sprite_position(s, static_cast<double>(ti), w, h);
    const auto b = sprite_position(s, static_cast<double>(ti) + 1.0, w, h);
    const double speed = std::hypot(b[0] - a[0], b[1] - a[1]);
    amp[static_cast<std::size_t>(ti)] = 0.2 + 0.6 * std::min(1.0, speed / ref_speed);
  }
  AudioClip clip;
  clip.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(t) / frame_rate * sample_rate));
  clip.samples.resize(n);
  const double f = s.tone_frequency();
  for (std::size_t i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / sample_rate;
    // Linear interpolation of the envelope between frame centres.
    const double fpos = std::clamp(time * frame_rate - 0.5, 0.0, static_cast<double>(t - 1));
    const auto lo = static_cast<std::size_t>(std::floor(fpos));
    const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(t - 1));
    const double frac = fpos - static_cast<double>(lo);
    const double env = (1.0 - frac) * amp[lo] + frac * amp[hi];
    clip.samples[i] = static_cast<float>(env * std::sin(2.0 * std::numbers::pi * f * time + s.tone_phase));
  }
  return clip;
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t sample_id) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(global_seed ^ splitmix(sample_id));
}

BlendSample gen_sprite_sample(std::uint64_t seed, BlendMode mode, Index t, Index w, Index h,
                              const SpriteOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, kNumSpriteClasses - 1);
  const auto c1 = static_cast<SpriteClass>(cls(rng));
  std::uniform_int_distribution<int> other(1, kNumSpriteClasses - 1);
  const auto c2 = static_cast<SpriteClass>((static_cast<int>(c1) + other(rng)) % kNumSpriteClasses);
  const SpriteSceneSpec s1 = random_sprite_scene(rng, c1, w, h);
  const SpriteSceneSpec s2 = random_sprite_scene(rng, c2, w, h);

  BlendSample out;
  out.blend_mode = mode;
  out.v1 = render_sprite_scene(s1, t, w, h, options.frame_rate);
  out.v2 = render_sprite_scene(s2, t, w, h, options.frame_rate);
  out.audio1 = render_sprite_audio(s1, t, w, h, options.frame_rate, options.sample_rate);
  out.metadata["class1"] = sprite_class_name(c1);
  out.metadata["class2"] = sprite_class_name(c2);
  out.metadata["tone1_hz"] = std::to_string(s1.tone_frequency());
  if (mode == BlendMode::kTransparent) {
    out.alpha = make_transparent_alpha(t, w, h);
  } else {
    const SlicOptions& o = options.slic;
    const int k = static_cast<int>(std::min<Index>(o.target_segments, t * w * h));
    const SupervoxelLabels labels = extract_supervoxels(out.v1, k, o.compactness, o.temporal_scale, o.max_iterations);
    const int chosen = choose_occlusion_segment(labels, rng);
    out.alpha = make_occlusion_alpha(labels, chosen);
    out.metadata["segment"] = std::to_string(chosen);
    out.metadata["num_segments"] = std::to_string(labels.num_segments);
  }
  out.blended = blend(out.v1, out.v2, out.alpha);
  return out;
}

}  // namespace c3
