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

#include <benchmark/benchmark.h>

#include <random>

#include "c3/harness.hpp"

namespace c3 {
namespace {

Tensor<float> uniform(Shape shape, std::uint64_t seed, float lo = 0, float hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Forward and backward of a 3x3x3 convolution at the desk resolution.
void BM_Conv3d(benchmark::State& state) {
  const auto ci = static_cast<Index>(state.range(0)), co = static_cast<Index>(state.range(1));
  RVar x = RVar::parameter(uniform({8, 8, 32, 32, ci}, 1, -1, 1));
  RVar w = RVar::parameter(uniform({3, 3, 3, ci, co}, 2, -0.1f, 0.1f));
  RVar b = RVar::parameter(Tensor<float>({co}));
  const ops::ConvSpec spec{{1, 1, 1}, {1, 1, 1}};
  for (auto _ : state) {
    RVar y = ops::conv3d(x, w, b, spec);
    backward(ops::sum(y));
    benchmark::DoNotOptimize(w.grad().data());
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 8 * 8 * 32 * 32 * 27 * ci * co);
}
BENCHMARK(BM_Conv3d)->Args({3, 16})->Args({16, 32})->Unit(benchmark::kMillisecond);

void BM_Compose(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), n = m;
  const LayerSet layers{uniform({8, 32, 32, m, 3}, 3)};
  const CoeffSet coeffs{uniform({8, 32, 32, n, m}, 4)};
  for (auto _ : state) benchmark::DoNotOptimize(compose(layers, coeffs).outputs.data());
}
BENCHMARK(BM_Compose)->Arg(2)->Arg(4);

void BM_ReconLoss(benchmark::State& state) {
  const auto side = static_cast<Index>(state.range(0));
  const Tensor<float> u = uniform({8, side, side, 3}, 5), v = uniform({8, side, side, 3}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(recon_loss(u, v).value);
  state.SetBytesProcessed(state.iterations() * 2 * u.size() * static_cast<std::int64_t>(sizeof(float)));
}
BENCHMARK(BM_ReconLoss)->Arg(32)->Arg(128);

void BM_Supervoxels(benchmark::State& state) {
  const BlendSample s = gen_sprite_sample(7, BlendMode::kTransparent, 8, 32, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_supervoxels(s.v1, static_cast<int>(state.range(0)), 10.0, 1.0).num_segments);
  }
}
BENCHMARK(BM_Supervoxels)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Spectrogram(benchmark::State& state) {
  const BlendSample s = gen_sprite_sample(8, BlendMode::kTransparent, 8, 32, 32);
  for (auto _ : state) benchmark::DoNotOptimize(compute_log_spectrogram(*s.audio1).values.data());
}
BENCHMARK(BM_Spectrogram);

// One optimizer step of the desk C2 model.
void BM_DeskTrainStep(benchmark::State& state) {
  TrainConfig c = desk_preset(ModelVariant::kC2, BlendMode::kTransparent);
  c.steps = 1;
  C3Model model(c.model);
  for (auto _ : state) train(model, c);
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond)->Iterations(5);

}  // namespace
}  // namespace c3

BENCHMARK_MAIN();
