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

#include "c3/ops.hpp"
#include "grad_check.hpp"

namespace c3 {
namespace {

using testing::check_gradients;
using testing::DVar;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kTol = 1e-4;

// Keeps entries away from the kinks of relu/abs/max.
Tensor<double> away_from_zero(Shape s, std::mt19937_64& rng) {
  Tensor<double> t = random_tensor(std::move(s), rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.values())
    if (flip(rng)) v = -v;
  return t;
}

TEST(OpsGradient, Elementwise) {
  std::mt19937_64 rng(1);
  auto a = away_from_zero({2, 3, 4}, rng);
  auto b = away_from_zero({2, 3, 4}, rng);
  auto f = [](const std::vector<DVar>& v) {
    DVar x = ops::add(ops::mul(v[0], v[1]), ops::sub(ops::relu(v[0]), ops::abs(v[1])));
    x = ops::add(x, ops::leaky_relu(v[1], 0.1));
    return weighted_sum(ops::add(ops::sigmoid(ops::scale(x, 0.7)), x));
  };
  auto r = check_gradients(f, {a, b});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Ops, LeakyReluKeepsNegativeSlope) {
  auto y = ops::leaky_relu(Var<double>::constant(Tensor<double>({3}, {-2.0, 0.0, 3.0})), 0.1);
  EXPECT_DOUBLE_EQ(y.value()[0], -0.2);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.0);
  EXPECT_DOUBLE_EQ(y.value()[2], 3.0);
}

TEST(OpsGradient, SoftmaxConcatSlice) {
  std::mt19937_64 rng(2);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({2, 3, 2}, rng);
  auto f = [](const std::vector<DVar>& v) {
    DVar c = ops::concat_last<double>({v[0], v[1]});
    return weighted_sum(ops::add(ops::softmax_last(c), ops::reshape(c, {2, 3, 6})));
  };
  auto g = [](const std::vector<DVar>& v) { return weighted_sum(ops::slice_last(v[0], 1, 2)); };
  EXPECT_LT(check_gradients(f, {a, b}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(g, {a}).max_rel_error, kTol);
}

TEST(OpsGradient, MeanAndSum) {
  std::mt19937_64 rng(3);
  auto a = random_tensor({3, 5}, rng);
  auto f = [](const std::vector<DVar>& v) { return ops::add(ops::mean(v[0]), ops::scale(ops::sum(v[0]), 0.3)); };
  EXPECT_LT(check_gradients(f, {a}).max_rel_error, kTol);
}

TEST(OpsGradient, Conv3dStridedPadded) {
  std::mt19937_64 rng(4);
  auto x = random_tensor({2, 4, 5, 4, 2}, rng);
  auto w = random_tensor({3, 3, 3, 2, 3}, rng);
  auto b = random_tensor({3}, rng);
  ops::ConvSpec spec{{2, 2, 1}, {1, 1, 1}};
  auto f = [&](const std::vector<DVar>& v) { return weighted_sum(ops::conv3d(v[0], v[1], v[2], spec)); };
  auto r = check_gradients(f, {x, w, b});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGradient, Conv3dAnisotropicKernel) {
  std::mt19937_64 rng(5);
  auto x = random_tensor({1, 3, 4, 4, 3}, rng);
  auto w = random_tensor({1, 3, 3, 3, 2}, rng);
  auto b = random_tensor({2}, rng);
  ops::ConvSpec spec{{1, 1, 1}, {0, 1, 1}};
  auto f = [&](const std::vector<DVar>& v) { return weighted_sum(ops::conv3d(v[0], v[1], v[2], spec)); };
  auto r = check_gradients(f, {x, w, b});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGradient, UpConv3d) {
  std::mt19937_64 rng(6);
  auto x = random_tensor({2, 2, 2, 3, 3}, rng);
  auto w = random_tensor({3, 2, 2, 1, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto f = [&](const std::vector<DVar>& v) { return weighted_sum(ops::upconv3d(v[0], v[1], v[2], {2, 2, 1})); };
  auto r = check_gradients(f, {x, w, b});
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(OpsGradient, PoolingResizeLinear) {
  std::mt19937_64 rng(7);
  auto x = random_tensor({2, 2, 4, 4, 3}, rng);
  auto pool = [](const std::vector<DVar>& v) { return weighted_sum(ops::max_pool3d(v[0], {1, 2, 2})); };
  auto gap = [](const std::vector<DVar>& v) { return weighted_sum(ops::global_avg_pool(v[0])); };
  auto down = [](const std::vector<DVar>& v) { return weighted_sum(ops::resize_trilinear(v[0], {1, 3, 2})); };
  auto up = [](const std::vector<DVar>& v) { return weighted_sum(ops::resize_trilinear(v[0], {3, 6, 5})); };
  EXPECT_LT(check_gradients(pool, {x}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(gap, {x}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(down, {x}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(up, {x}).max_rel_error, kTol);
  auto in = random_tensor({3, 4}, rng);
  auto w = random_tensor({4, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto lin = [](const std::vector<DVar>& v) { return weighted_sum(ops::linear(v[0], v[1], v[2])); };
  EXPECT_LT(check_gradients(lin, {in, w, b}).max_rel_error, kTol);
}

TEST(OpsGradient, SelectPerSample) {
  std::mt19937_64 rng(8);
  auto a = random_tensor({3}, rng);
  auto b = random_tensor({3}, rng);
  auto f = [](const std::vector<DVar>& v) { return weighted_sum(ops::select_per_sample<double>({v[0], v[1]}, {1, 0, 1})); };
  EXPECT_LT(check_gradients(f, {a, b}).max_rel_error, kTol);
}

TEST(Autograd, SharedSubgraphAccumulates) {
  auto x = DVar::parameter(Tensor<double>({2}, std::vector<double>{1.5, -2.0}));
  DVar y = ops::mul(x, x);
  DVar z = ops::sum(ops::add(y, y));
  backward(z);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -8.0);
}

TEST(Autograd, StopGradientBlocksFlow) {
  auto x = DVar::parameter(Tensor<double>({1}, std::vector<double>{3.0}));
  DVar z = ops::add(ops::mul(x, stop_gradient(x)), x);
  backward(z);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Ops, ConvMatchesDirectSum) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({1, 3, 4, 5, 2}, rng);
  auto w = random_tensor({3, 3, 3, 2, 2}, rng);
  auto b = random_tensor({2}, rng);
  ops::ConvSpec spec{{1, 2, 2}, {1, 1, 1}};
  auto y = ops::conv3d(DVar::constant(x), DVar::constant(w), DVar::constant(b), spec).value();
  ASSERT_EQ(y.shape(), (Shape{1, 3, 2, 3, 2}));
  for (Index t = 0; t < 3; ++t)
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 3; ++j)
        for (Index o = 0; o < 2; ++o) {
          double acc = b[o];
          for (Index dt = 0; dt < 3; ++dt)
            for (Index di = 0; di < 3; ++di)
              for (Index dj = 0; dj < 3; ++dj) {
                const Index st = t + dt - 1, si = i * 2 + di - 1, sj = j * 2 + dj - 1;
                if (st < 0 || st >= 3 || si < 0 || si >= 4 || sj < 0 || sj >= 5) continue;
                for (Index c = 0; c < 2; ++c) {
                  acc += x[offset_of(x.shape(), {0, st, si, sj, c})] * w[offset_of(w.shape(), {dt, di, dj, c, o})];
                }
              }
          EXPECT_NEAR(y[offset_of(y.shape(), {0, t, i, j, o})], acc, 1e-12);
        }
}

}  // namespace
}  // namespace c3
