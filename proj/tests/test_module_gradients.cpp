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

#include "c3/audio.hpp"
#include "c3/decoder.hpp"
#include "c3/encoder.hpp"
#include "c3/losses.hpp"
#include "grad_check.hpp"

namespace c3 {
namespace {

using testing::check_gradients;
using testing::DVar;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kTol = 1e-4;

TEST(ModuleGradient, GateFeaturesThroughMaskLogits) {
  std::mt19937_64 rng(11);
  auto features = random_tensor({2, 4, 4, 4, 6}, rng);
  auto logits = random_tensor({2, 4, 4, 4, 3}, rng, -2, 2);
  auto f = [](const std::vector<DVar>& v) { return weighted_sum(gate_features(v[0], ops::softmax_last(v[1]))); };
  auto r = check_gradients(f, {features, logits});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(ModuleGradient, GateWithDownsampledMask) {
  std::mt19937_64 rng(12);
  auto features = random_tensor({1, 1, 2, 2, 4}, rng);
  auto logits = random_tensor({1, 2, 4, 4, 2}, rng, -2, 2);
  auto f = [](const std::vector<DVar>& v) {
    return weighted_sum(gate_features(v[0], downsample_mask(ops::softmax_last(v[1]), {1, 2, 2})));
  };
  auto r = check_gradients(f, {features, logits});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(ModuleGradient, Compose) {
  std::mt19937_64 rng(13);
  const int m = 3, n = 2;
  auto layers = random_tensor({2, 4, 4, m * 3}, rng);
  auto coeffs = random_tensor({2, 4, 4, n * m}, rng);
  auto f = [](const std::vector<DVar>& v) { return weighted_sum(compose(v[0], v[1], 3)); };
  auto r = check_gradients(f, {layers, coeffs});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(ModuleGradient, Fuse) {
  std::mt19937_64 rng(14);
  auto visual = random_tensor({2, 2, 2, 3, 3}, rng);
  auto audio = random_tensor({2, 5, 3, 2}, rng);
  auto f = [](const std::vector<DVar>& v) { return weighted_sum(fuse(v[0], v[1])); };
  auto r = check_gradients(f, {visual, audio});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(ModuleGradient, ReconLoss) {
  std::mt19937_64 rng(15);
  // Independent draws keep every pixel and difference away from |.| kinks.
  auto u = random_tensor({2, 2, 4, 4, 3}, rng, 0, 1);
  auto v = random_tensor({2, 2, 4, 4, 3}, rng, 0, 1);
  auto f = [](const std::vector<DVar>& x) { return weighted_sum(batched::recon_loss(x[0], x[1])); };
  auto r = check_gradients(f, {u, v});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

}  // namespace
}  // namespace c3
