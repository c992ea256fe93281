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

#include <gtest/gtest.h>

#include <map>
#include <queue>
#include <random>
#include <set>

#include "c3/blendgen.hpp"

namespace c3 {
namespace {

Video constant_video(Index t, Index w, Index h, std::array<float, 3> rgb) {
  Video v = Video::zeros(t, w, h);
  for (Index i = 0; i < v.frames.size(); ++i) v.frames[i] = rgb[static_cast<std::size_t>(i % 3)];
  return v;
}

// Connected components of equal colour under 6-connectivity.
Tensor<std::int32_t> colour_components(const Video& v) {
  const Index t = v.num_frames(), w = v.width(), h = v.height();
  Tensor<std::int32_t> comp(Shape{t, w, h}, -1);
  auto same = [&](Index a, Index b) {
    for (int c = 0; c < 3; ++c)
      if (v.frames[a * 3 + c] != v.frames[b * 3 + c]) return false;
    return true;
  };
  std::int32_t next = 0;
  for (Index s = 0; s < comp.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::queue<Index> q;
    q.push(s);
    comp[s] = next;
    while (!q.empty()) {
      const Index i = q.front();
      q.pop();
      const Index ti = i / (w * h), xi = (i / h) % w, yi = i % h;
      const Index nb[6][3] = {{ti - 1, xi, yi}, {ti + 1, xi, yi}, {ti, xi - 1, yi},
                              {ti, xi + 1, yi}, {ti, xi, yi - 1}, {ti, xi, yi + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[0] >= t || p[1] < 0 || p[1] >= w || p[2] < 0 || p[2] >= h) continue;
        const Index j = (p[0] * w + p[1]) * h + p[2];
        if (comp[j] < 0 && same(i, j)) {
          comp[j] = next;
          q.push(j);
        }
      }
    }
    ++next;
  }
  return comp;
}

// True when both labelings induce the same partition.
bool same_partition(const Tensor<std::int32_t>& a, const Tensor<std::int32_t>& b) {
  if (a.shape() != b.shape()) return false;
  std::map<std::int32_t, std::int32_t> ab, ba;
  for (Index i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

void expect_partition(const SupervoxelLabels& l) {
  std::set<std::int32_t> seen;
  for (auto v : l.labels.values()) {
    ASSERT_GE(v, 0);
    ASSERT_LT(v, l.num_segments);
    seen.insert(v);
  }
  EXPECT_EQ(static_cast<int>(seen.size()), l.num_segments);
}

TEST(TransparentAlpha, AllHalf) {
  const auto a = make_transparent_alpha(2, 4, 4);
  for (auto v : a.values()) EXPECT_EQ(v, 0.5f);
  const auto b = make_transparent_alpha(1, 8, 8);
  float sum = 0;
  for (auto v : b.values()) sum += v;
  EXPECT_EQ(sum, 32.0f);
  EXPECT_THROW(make_transparent_alpha(0, 4, 4), std::invalid_argument);
}

TEST(Supervoxels, ConstantVideoSingleSegment) {
  const auto l = extract_supervoxels(constant_video(2, 8, 8, {0.3f, 0.3f, 0.3f}), 1, 0.1, 1.0);
  EXPECT_EQ(l.num_segments, 1);
  for (auto v : l.labels.values()) EXPECT_EQ(v, 0);
}

TEST(Supervoxels, TwoHalvesMatchComponentOracle) {
  Video v = constant_video(4, 16, 16, {0.0f, 0.0f, 1.0f});
  for (Index t = 0; t < 4; ++t)
    for (Index x = 0; x < 8; ++x)
      for (Index y = 0; y < 16; ++y) {
        const Index i = ((t * 16 + x) * 16 + y) * 3;
        v.frames[i] = 1.0f;
        v.frames[i + 2] = 0.0f;
      }
  const auto l = extract_supervoxels(v, 2, 0.1, 1.0);
  ASSERT_EQ(l.num_segments, 2);
  EXPECT_TRUE(same_partition(l.labels, colour_components(v)));

  // Choosing the segment of the red half yields exactly that half.
  const auto alpha = make_occlusion_alpha(l, l.labels[0]);
  for (Index t = 0; t < 4; ++t)
    for (Index x = 0; x < 16; ++x)
      for (Index y = 0; y < 16; ++y) EXPECT_EQ(alpha[(t * 16 + x) * 16 + y], x < 8 ? 1.0f : 0.0f);
}

TEST(Supervoxels, PartitionPropertyOnRandomVideos) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    Video v = Video::zeros(3, 9, 11);
    for (auto& x : v.frames.values()) x = u(rng);
    const int k = 1 + trial * 4;
    const auto l = extract_supervoxels(v, k, 0.2, 1.0);
    EXPECT_LE(l.num_segments, k);
    expect_partition(l);
  }
}

TEST(Supervoxels, DeterministicAndRejectsTooManySegments) {
  const BlendSample s = gen_sprite_sample(4, BlendMode::kTransparent, 3, 12, 12);
  EXPECT_EQ(extract_supervoxels(s.v1, 6, 0.1, 1.0).labels, extract_supervoxels(s.v1, 6, 0.1, 1.0).labels);
  EXPECT_THROW(extract_supervoxels(s.v1, 3 * 12 * 12 + 1, 0.1, 1.0), std::invalid_argument);
}

TEST(OcclusionAlpha, SingleSegmentAndSumMatchesVolume) {
  SupervoxelLabels one{Tensor<std::int32_t>(Shape{2, 4, 4}, 0), 1};
  const auto full = make_occlusion_alpha(one, 0);
  for (auto v : full.values()) EXPECT_EQ(v, 1.0f);
  EXPECT_THROW(make_occlusion_alpha(one, 1), std::invalid_argument);

  const BlendSample s = gen_sprite_sample(8, BlendMode::kTransparent, 4, 16, 16);
  const auto l = extract_supervoxels(s.v1, 8, 0.1, 1.0);
  for (int c = 0; c < l.num_segments; ++c) {
    const auto a = make_occlusion_alpha(l, c);
    double sum = 0;
    Index volume = 0;
    for (Index i = 0; i < a.size(); ++i) {
      sum += a[i];
      volume += l.labels[i] == c;
    }
    EXPECT_EQ(sum, static_cast<double>(volume));
  }
}

TEST(Blend, BoundaryAndHandValues) {
  const Video a = constant_video(2, 8, 8, {0.2f, 0.2f, 0.2f});
  const Video b = constant_video(2, 8, 8, {0.6f, 0.6f, 0.6f});
  EXPECT_EQ(blend(a, b, Tensor<float>(Shape{2, 8, 8}, 1.0f)).frames, a.frames);
  EXPECT_EQ(blend(a, b, Tensor<float>(Shape{2, 8, 8}, 0.0f)).frames, b.frames);
  const Video mid = blend(a, b, make_transparent_alpha(2, 8, 8));
  for (auto v : mid.frames.values()) EXPECT_NEAR(v, 0.4f, 1e-7);
  EXPECT_THROW(blend(a, constant_video(2, 8, 9, {0, 0, 0}), make_transparent_alpha(2, 8, 8)), std::invalid_argument);
  EXPECT_THROW(blend(a, b, make_transparent_alpha(2, 8, 4)), std::invalid_argument);
}

TEST(Blend, ReblendingWithBinaryAlphaIsIdempotent) {
  const BlendSample s = gen_sprite_sample(21, BlendMode::kOcclusion, 4, 16, 16);
  EXPECT_EQ(blend(s.v1, s.v2, s.alpha).frames, s.blended.frames);
  // blended equals v2 outside the chosen segment.
  for (Index i = 0; i < s.alpha.size(); ++i) {
    if (s.alpha[i] != 0.0f) continue;
    for (int c = 0; c < 3; ++c) ASSERT_EQ(s.blended.frames[i * 3 + c], s.v2.frames[i * 3 + c]);
  }
}

TEST(SpriteSample, DeterministicInSeed) {
  for (auto mode : {BlendMode::kTransparent, BlendMode::kOcclusion}) {
    const BlendSample a = gen_sprite_sample(77, mode, 4, 16, 16);
    const BlendSample b = gen_sprite_sample(77, mode, 4, 16, 16);
    EXPECT_EQ(a.blended.frames, b.blended.frames);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.audio1->samples, b.audio1->samples);
    EXPECT_EQ(a.metadata, b.metadata);
  }
  EXPECT_NE(gen_sprite_sample(1, BlendMode::kTransparent, 4, 16, 16).blended.frames,
            gen_sprite_sample(2, BlendMode::kTransparent, 4, 16, 16).blended.frames);
}

TEST(SpriteSample, SatisfiesBlendSampleInvariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto mode : {BlendMode::kTransparent, BlendMode::kOcclusion}) {
      const BlendSample s = gen_sprite_sample(derive_seed(3, seed), mode, 4, 16, 16);
      EXPECT_TRUE(validate_blend_sample(s).empty()) << "seed " << seed;
      EXPECT_TRUE(validate_video(s.v1).empty());
      EXPECT_NE(s.metadata.at("class1"), s.metadata.at("class2"));
    }
  }
}

TEST(SpriteSample, ToneIsAFunctionOfClass) {
  std::map<std::string, std::string> tone_of;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const BlendSample s = gen_sprite_sample(seed, BlendMode::kTransparent, 2, 8, 8);
    const auto [it, fresh] = tone_of.emplace(s.metadata.at("class1"), s.metadata.at("tone1_hz"));
    EXPECT_EQ(it->second, s.metadata.at("tone1_hz"));
  }
  EXPECT_EQ(tone_of.size(), static_cast<std::size_t>(kNumSpriteClasses));
}

TEST(SpriteSample, AudioDurationMatchesVideo) {
  const BlendSample s = gen_sprite_sample(5, BlendMode::kTransparent, 8, 16, 16);
  EXPECT_NEAR(s.audio1->duration(), s.v1.duration(), 1.0 / s.v1.frame_rate);
  for (float a : s.audio1->samples) {
    ASSERT_LE(a, 1.0f);
    ASSERT_GE(a, -1.0f);
  }
}

TEST(DeriveSeed, DistinctPerIdAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 1000; ++id) seen.insert(derive_seed(42, id));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
}

}  // namespace
}  // namespace c3
