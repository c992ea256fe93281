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

#include <cmath>
#include <random>

#include "c3/losses.hpp"

namespace c3 {
namespace {

Video random_video(std::mt19937& rng, Index t = 2, Index w = 8, Index h = 8) {
  std::uniform_real_distribution<float> u(0, 1);
  Video v = Video::zeros(t, w, h);
  for (auto& x : v.frames.values()) x = u(rng);
  return v;
}

OutputSet stack_slots(const std::vector<Video>& slots) {
  const Shape& s = slots[0].frames.shape();
  const Index n = static_cast<Index>(slots.size());
  OutputSet o{Tensor<float>(Shape{s[0], s[1], s[2], n, 3})};
  const Index pixels = s[0] * s[1] * s[2];
  for (Index p = 0; p < pixels; ++p)
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < 3; ++c) o.outputs[(p * n + i) * 3 + c] = slots[static_cast<std::size_t>(i)].frames[p * 3 + c];
  return o;
}

// Direct evaluation of the per-frame pixel and forward-difference terms.
double recon_oracle(const Video& u, const Video& v) {
  const Index t = u.num_frames(), w = u.width(), h = u.height();
  auto d = [&](Index f, Index x, Index y, Index c) {
    if (x >= w || y >= h) return 0.0;
    const Index i = ((f * w + x) * h + y) * 3 + c;
    return double(u.frames[i]) - double(v.frames[i]);
  };
  double total = 0;
  for (Index f = 0; f < t; ++f) {
    double pix = 0, grad = 0;
    for (Index x = 0; x < w; ++x)
      for (Index y = 0; y < h; ++y)
        for (Index c = 0; c < 3; ++c) {
          pix += std::abs(d(f, x, y, c));
          const double gx = x + 1 < w ? d(f, x + 1, y, c) - d(f, x, y, c) : 0.0;
          const double gy = y + 1 < h ? d(f, x, y + 1, c) - d(f, x, y, c) : 0.0;
          grad += std::abs(gx) + std::abs(gy);
        }
    const double count = static_cast<double>(w * h * 3);
    total += pix / count + grad / count;
  }
  return total / (2.0 * static_cast<double>(t));
}

TEST(ReconLoss, ZeroOnIdenticalVideos) {
  std::mt19937 rng(1);
  const Video v = random_video(rng);
  EXPECT_EQ(recon_loss(v, v).value, 0.0);
}

TEST(ReconLoss, ConstantOffsetHandValue) {
  Video u = Video::zeros(3, 8, 8), v = Video::zeros(3, 8, 8);
  for (auto& x : u.frames.values()) x = 0.5f;
  for (auto& x : v.frames.values()) x = 0.4f;
  const LossValue l = recon_loss(u, v);
  EXPECT_NEAR(l.value, 0.05, 1e-7);
  EXPECT_NEAR(l.breakdown.at("gradient"), 0.0, 1e-12);
}

TEST(ReconLoss, SymmetricMatchesOracleAndSumsBreakdown) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Video u = random_video(rng, 2, 8, 9), v = random_video(rng, 2, 8, 9);
    const LossValue a = recon_loss(u, v), b = recon_loss(v, u);
    EXPECT_NEAR(a.value, b.value, 1e-12);
    EXPECT_NEAR(a.value, recon_oracle(u, v), 1e-6);
    double sum = 0;
    for (const auto& [name, part] : a.breakdown) sum += part;
    EXPECT_NEAR(a.value, sum, 1e-7);
  }
}

TEST(ReconLoss, RejectsShapeMismatch) {
  EXPECT_THROW(recon_loss(Video::zeros(2, 8, 8), Video::zeros(2, 8, 9)), std::invalid_argument);
}

TEST(ReconLoss, BatchedAgreesWithPerSample) {
  std::mt19937 rng(3);
  const Video a0 = random_video(rng), a1 = random_video(rng), b0 = random_video(rng), b1 = random_video(rng);
  auto stack = [](const Video& x, const Video& y) {
    Tensor<float> t(Shape{2, 2, 8, 8, 3});
    std::copy(x.frames.values().begin(), x.frames.values().end(), t.data());
    std::copy(y.frames.values().begin(), y.frames.values().end(), t.data() + x.frames.size());
    return RVar::constant(std::move(t));
  };
  const Tensor<float> per = batched::recon_loss(stack(a0, a1), stack(b0, b1)).value();
  ASSERT_EQ(per.shape(), (Shape{2}));
  EXPECT_NEAR(per[0], recon_loss(a0, b0).value, 1e-6);
  EXPECT_NEAR(per[1], recon_loss(a1, b1).value, 1e-6);
}

TEST(Pil, MatrixExample) {
  const PilResult r = pil_from_matrix({std::vector<double>{0.1, 0.5}, std::vector<double>{0.4, 0.2}});
  EXPECT_NEAR(r.loss.value, 0.3, 1e-12);
  EXPECT_EQ(r.assignment, (Assignment{0, 1}));
  EXPECT_NEAR(r.loss.breakdown.at("first"), 0.1, 1e-12);
  EXPECT_NEAR(r.loss.breakdown.at("second"), 0.2, 1e-12);
}

TEST(Pil, PerfectReconstructionAndSlotSwap) {
  std::mt19937 rng(4);
  const Video v1 = random_video(rng), v2 = random_video(rng), other = random_video(rng);
  EXPECT_EQ(pil_loss(v1, v2, stack_slots({v1, v2})).loss.value, 0.0);
  const PilResult a = pil_loss(v1, v2, stack_slots({other, v2, v1}));
  const PilResult b = pil_loss(v1, v2, stack_slots({v1, other, v2}));
  EXPECT_EQ(a.loss.value, 0.0);
  EXPECT_EQ(a.assignment, (Assignment{2, 1}));
  EXPECT_EQ(b.assignment, (Assignment{0, 2}));
  const PilResult x = pil_loss(v1, v2, stack_slots({other, v1}));
  const PilResult y = pil_loss(v1, v2, stack_slots({v1, other}));
  EXPECT_EQ(x.loss.value, y.loss.value);
}

TEST(Pil, MatchesBruteForceEnumeration) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 2; n <= 6; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      std::array<std::vector<double>, 2> m{std::vector<double>(n), std::vector<double>(n)};
      for (auto& row : m)
        for (auto& v : row) v = u(rng);
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) best = std::min(best, m[0][static_cast<std::size_t>(i)] + m[1][static_cast<std::size_t>(j)]);
      const PilResult r = pil_from_matrix(m);
      ASSERT_EQ(r.loss.value, best);
      ASSERT_NE(r.assignment.first, r.assignment.second);
    }
  }
  EXPECT_THROW(pil_from_matrix({std::vector<double>{0.1}, std::vector<double>{0.2}}), std::invalid_argument);
}

TEST(Det, SlotOrderMattersAndBoundsPil) {
  std::mt19937 rng(6);
  const Video v1 = random_video(rng), v2 = random_video(rng);
  EXPECT_EQ(det_loss(v1, v2, stack_slots({v1, v2})).value, 0.0);
  EXPECT_GT(det_loss(v1, v2, stack_slots({v2, v1})).value, 0.0);
  EXPECT_EQ(pil_loss(v1, v2, stack_slots({v2, v1})).loss.value, 0.0);
  EXPECT_THROW(det_loss(v1, v2, stack_slots({v1, v2, v2})), std::invalid_argument);
  for (int trial = 0; trial < 20; ++trial) {
    const OutputSet o = stack_slots({random_video(rng), random_video(rng)});
    const double pil = pil_loss(v1, v2, o).loss.value;
    const double det = det_loss(v1, v2, o).value;
    EXPECT_LE(pil, det);
    if (pil_loss(v1, v2, o).assignment == Assignment{0, 1}) EXPECT_EQ(pil, det);
  }
}

TEST(Pil, BatchedAgreesWithPerSample) {
  std::mt19937 rng(7);
  const int n = 3;
  std::vector<Video> v1s, v2s;
  std::vector<OutputSet> outs;
  for (int b = 0; b < 3; ++b) {
    v1s.push_back(random_video(rng));
    v2s.push_back(random_video(rng));
    // Plant the targets so that each sample has a different minimizer.
    std::vector<Video> slots{random_video(rng), random_video(rng), random_video(rng)};
    slots[static_cast<std::size_t>(b)] = v1s.back();
    outs.push_back(stack_slots(slots));
  }
  auto stack = [](const std::vector<Tensor<float>>& parts) {
    Shape s = parts[0].shape();
    s.insert(s.begin(), static_cast<Index>(parts.size()));
    Tensor<float> t(s);
    Index off = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), t.data() + off);
      off += p.size();
    }
    return RVar::constant(std::move(t));
  };
  std::vector<Tensor<float>> a, b, o;
  for (int i = 0; i < 3; ++i) {
    a.push_back(v1s[static_cast<std::size_t>(i)].frames);
    b.push_back(v2s[static_cast<std::size_t>(i)].frames);
    const Shape& s = outs[static_cast<std::size_t>(i)].outputs.shape();
    o.push_back(outs[static_cast<std::size_t>(i)].outputs.reshaped({s[0], s[1], s[2], s[3] * 3}));
  }
  const auto r = batched::pil_loss(stack(a), stack(b), stack(o), n);
  double mean = 0;
  for (int i = 0; i < 3; ++i) {
    const PilResult ref = pil_loss(v1s[static_cast<std::size_t>(i)], v2s[static_cast<std::size_t>(i)], outs[static_cast<std::size_t>(i)]);
    EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], ref.assignment);
    EXPECT_NEAR(r.per_sample[static_cast<std::size_t>(i)], ref.loss.value, 1e-6);
    EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)].first, i);
    mean += ref.loss.value / 3;
  }
  EXPECT_NEAR(r.loss.value()[0], mean, 1e-6);
}

TEST(Reg, HandValues) {
  const std::vector<float> s{0.2f, 0.5f};
  const std::vector<double> actual{0.3, 0.1};
  const LossValue l = reg_loss(s, actual);
  EXPECT_NEAR(l.value, 0.5, 1e-7);
  EXPECT_NEAR(l.breakdown.at("slot0") + l.breakdown.at("slot1"), l.value, 1e-7);
  const std::vector<float> exact{0.3f, 0.1f};
  const std::vector<double> same{0.3f, 0.1f};
  EXPECT_EQ(reg_loss(exact, same).value, 0.0);
  EXPECT_THROW(reg_loss(s, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Reg, VideoOverloadUsesSlotLosses) {
  std::mt19937 rng(8);
  const Video v1 = random_video(rng);
  const OutputSet o = stack_slots({random_video(rng), v1, random_video(rng)});
  const auto losses = slot_losses(v1, o);
  ASSERT_EQ(losses.size(), 3u);
  EXPECT_EQ(losses[1], 0.0);
  std::vector<float> s(losses.begin(), losses.end());
  EXPECT_NEAR(reg_loss(v1, s, o).value, 0.0, 1e-6);
}

TEST(Control, HandEvaluatedCases) {
  const std::vector<double> losses{0.1, 0.3, 0.2, 0.4};
  const ControlJudgement best = judge_control(losses, 0);
  EXPECT_NEAR(best.threshold, 0.06, 1e-9);
  EXPECT_TRUE(best.correct);
  EXPECT_FALSE(judge_control(losses, 2).correct);
  const std::vector<double> flat{0.25, 0.25, 0.25};
  const ControlJudgement tie = judge_control(flat, 2);
  EXPECT_EQ(tie.threshold, 0.0);
  EXPECT_TRUE(tie.correct);
  EXPECT_THROW(judge_control(losses, 4), std::invalid_argument);
}

TEST(Control, ChanceSelectorNearHalf) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  std::bernoulli_distribution coin(0.5);
  const int trials = 2000;
  int correct = 0;
  for (int k = 0; k < trials; ++k) {
    const std::vector<double> losses{u(rng), u(rng)};
    correct += judge_control(losses, coin(rng) ? 1 : 0).correct;
  }
  const double p = static_cast<double>(correct) / trials;
  EXPECT_NEAR(p, 0.5, 3 * std::sqrt(0.25 / trials));
}

TEST(Scoring, TransparentAndOcclusion) {
  EXPECT_EQ(score_transparent({1, 2}, {1, 2}), 1.0);
  EXPECT_EQ(score_transparent({2, 1}, {1, 2}), 1.0);
  EXPECT_EQ(score_transparent({1, 3}, {1, 2}), 0.5);
  EXPECT_EQ(score_transparent({3, 4}, {1, 2}), 0.0);
  EXPECT_EQ(score_transparent({1, 1}, {1, 2}), 0.5);
  EXPECT_EQ(score_occlusion(5, 5), 1.0);
  EXPECT_EQ(score_occlusion(5, 6), 0.0);
  auto rename = [](Label l) { return 100 - 3 * l; };
  EXPECT_EQ(score_occlusion(rename(5), rename(5)), 1.0);
  EXPECT_EQ(score_transparent({rename(1), rename(3)}, {rename(1), rename(2)}), 0.5);
}

class BrightnessClassifier : public ActionClassifier {
 public:
  Label classify(const Video& v) const override {
    double s = 0;
    for (auto x : v.frames.values()) s += x;
    return s / static_cast<double>(v.frames.size()) > 0.5 ? 1 : 0;
  }
};

TEST(Scoring, PluggableClassifier) {
  Video dark = Video::zeros(1, 8, 8), bright = Video::zeros(1, 8, 8);
  for (auto& x : bright.frames.values()) x = 0.9f;
  const BrightnessClassifier c;
  EXPECT_EQ(score_transparent(c, dark, bright, {0, 1}), 1.0);
  EXPECT_EQ(score_transparent(c, dark, dark, {0, 1}), 0.5);
  EXPECT_EQ(score_occlusion(c, bright, 1), 1.0);
}

}  // namespace
}  // namespace c3
