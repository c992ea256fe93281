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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "c3/harness.hpp"
#include "c3/visuals.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace c3 {
namespace {

using testing::TempDir;

TrainConfig tiny(ModelVariant variant, BlendMode mode = BlendMode::kTransparent) {
  TrainConfig c = desk_preset(variant, mode);
  c.frames = 4;
  c.width = c.height = 16;
  c.batch_size = 2;
  c.steps = 2;
  return c;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
  const auto x = a.values();
  const auto y = b.values();
  return a.shape() == b.shape() && std::equal(x.begin(), x.end(), y.begin());
}

// Direct mean of l(V1,V) + l(V2,V) over the set.
double identity_closed_form(const SampleSource& src, Index count) {
  double sum = 0;
  for (Index i = 0; i < count; ++i) {
    const BlendSample s = src.get(i);
    sum += recon_loss(s.v1, s.blended).value + recon_loss(s.v2, s.blended).value;
  }
  return sum / static_cast<double>(count);
}

TEST(Optimizer, HeavyBallWithPrefixScales) {
  ParameterStore store;
  RVar a = store.add("audio/w", Tensor<float>({2}, 1.0f));
  RVar d = store.add("decoder/w", Tensor<float>({2}, 1.0f));
  MomentumSgd opt(0.5);
  opt.set_lr_scale("audio/", 0.25);
  EXPECT_THROW(opt.set_lr_scale("x", 0), std::invalid_argument);
  for (int step = 0; step < 2; ++step) {
    store.zero_grad();
    backward(ops::add(ops::sum(a), ops::sum(d)));
    opt.step(store, 0.1);
  }
  // v1 = 1, v2 = 1.5; steps of lr*v.
  EXPECT_NEAR(d.value()[0], 1.0f - 0.1f * 2.5f, 1e-6);
  EXPECT_NEAR(a.value()[1], 1.0f - 0.025f * 2.5f, 1e-6);
}

TEST(TrainConfig, RejectsDeterministicControlWithoutTwoSlots) {
  TrainConfig c = tiny(ModelVariant::kC3Det);
  c.model.n = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(train(c), std::invalid_argument);
  c.model.n = 2;
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfig, RejectsBadSchedulesAndShapes) {
  TrainConfig c = tiny(ModelVariant::kC2);
  c.lr.decay_steps = {100, 100};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(ModelVariant::kC2);
  c.lr.initial = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(ModelVariant::kC2);
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(ModelVariant::kC2);
  c.width = 20;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(ModelVariant::kC2);
  c.control_lr_scale = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(ModelVariant::kC2);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainConfig, PresetsAndJsonRoundTrip) {
  const TrainConfig full = full_preset(ModelVariant::kC3Internal, BlendMode::kTransparent);
  EXPECT_EQ(full.frames, 64);
  EXPECT_EQ(full.width, 128);
  EXPECT_EQ(full.render_size, 148);
  EXPECT_EQ(full.batch_size, 128);
  EXPECT_EQ(full.lr.initial, 0.5);
  EXPECT_EQ(full.lr.decay_steps, (std::vector<long>{80000, 100000, 120000}));
  EXPECT_EQ(full.steps, 124000);
  EXPECT_NEAR(full.lr.at(0), 0.5, 1e-12);
  EXPECT_NEAR(full.lr.at(80000), 0.05, 1e-12);
  EXPECT_NEAR(full.lr.at(123999), 0.0005, 1e-12);

  const TrainConfig back = train_config_from_json(train_config_to_json(full), TrainConfig{});
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(full));

  const TrainConfig patched =
      train_config_from_json(R"({"variant": "c3-det", "n": 2, "m": 2, "lr": 0.2, "steps": 7})", tiny(ModelVariant::kC2));
  EXPECT_EQ(patched.model.variant, ModelVariant::kC3Det);
  EXPECT_EQ(patched.model.n, 2);
  EXPECT_EQ(patched.lr.initial, 0.2);
  EXPECT_EQ(patched.steps, 7);
  EXPECT_EQ(patched.frames, 4);
}

TEST(Train, SameSeedSameFirstSteps) {
  for (auto variant : {ModelVariant::kC2, ModelVariant::kC3Internal}) {
    const TrainConfig c = tiny(variant);
    const TrainReport a = train(c), b = train(c);
    ASSERT_EQ(a.curve.size(), 2u);
    ASSERT_EQ(b.curve.size(), 2u);
    EXPECT_EQ(a.curve[0].loss, b.curve[0].loss);
    EXPECT_EQ(a.curve[1].loss, b.curve[1].loss);
    EXPECT_NE(a.curve[0].loss, a.curve[1].loss);
  }
}

TEST(Train, WorkersDoNotChangeTheStream) {
  TrainConfig c = tiny(ModelVariant::kC2);
  c.steps = 3;
  const TrainReport inline_run = train(c);
  c.workers = 3;
  c.queue_capacity = 4;
  const TrainReport threaded = train(c);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(inline_run.curve[i].loss, threaded.curve[i].loss);
}

TEST(Train, WritesMetricsCheckpointsAndConfig) {
  TempDir dir;
  TrainConfig c = tiny(ModelVariant::kC3Internal);
  c.steps = 4;
  c.checkpoint_every = 2;
  c.log_every = 1;
  c.output_dir = dir.path();
  const TrainReport r = train(c);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "step_2" / "model.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "step_4" / "model.json"));
  EXPECT_TRUE(std::filesystem::exists(r.checkpoint / "model.json"));
  std::ifstream metrics(dir.path() / "train_metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("pil"));
    EXPECT_TRUE(j.contains("reg"));
    ++lines;
  }
  EXPECT_EQ(lines, 4);
  std::ifstream cfg(dir.path() / "train_config.json");
  std::stringstream ss;
  ss << cfg.rdbuf();
  EXPECT_EQ(train_config_from_json(ss.str(), TrainConfig{}).steps, 4);
}

TEST(Train, NonFiniteLossDumpsBatch) {
  TempDir dir;
  TrainConfig c = tiny(ModelVariant::kC2);
  c.output_dir = dir.path();
  C3Model model(c.model);
  model.parameters().get("decoder/layer_head/b").mutable_value()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(model, c);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_TRUE(std::filesystem::exists(e.dump() / "manifest.jsonl"));
    EXPECT_EQ(manifest_source(e.dump()).count, c.batch_size);
  }
}

TEST(Checkpoint, RoundTripReproducesEvaluation) {
  TempDir dir;
  TrainConfig c = tiny(ModelVariant::kC3Internal);
  C3Model model(c.model);
  train(model, c);
  model.save(dir.path() / "ckpt");
  const auto loaded = C3Model::load(dir.path() / "ckpt");
  const SampleSource val = validation_source(c, 6);
  const EvalReport a = evaluate(NeuralDecomposer(model), val, 6);
  const EvalReport b = evaluate(NeuralDecomposer(*loaded), val, 6);
  EXPECT_EQ(a.mean_pil, b.mean_pil);
  EXPECT_EQ(a.correct, b.correct);
}

TEST(Checkpoint, IncompatibleParametersAreNamed) {
  TempDir dir;
  C3Model c2(tiny(ModelVariant::kC2).model);
  c2.save(dir.path());
  C3Model internal(tiny(ModelVariant::kC3Internal).model);
  try {
    internal.load_parameters(dir.path());
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("control/"), std::string::npos) << e.what();
  }
}

TEST(Evaluate, IdentityMatchesClosedForm) {
  const TrainConfig c = tiny(ModelVariant::kC2);
  const SampleSource val = validation_source(c, 20);
  const EvalReport r = evaluate(IdentityDecomposer(2), val, 20);
  EXPECT_NEAR(r.mean_pil, identity_closed_form(val, 20), 1e-6);
  EXPECT_NEAR(r.mean_pil_per_target, r.mean_pil / 2, 1e-12);
}

TEST(Evaluate, OracleIsPerfect) {
  for (auto mode : {BlendMode::kTransparent, BlendMode::kOcclusion}) {
    const SampleSource val = validation_source(tiny(ModelVariant::kC2, mode), 10);
    const EvalReport r = evaluate(OracleDecomposer(), val, 10);
    EXPECT_EQ(r.mean_pil, 0.0);
    EXPECT_EQ(r.control_accuracy, 1.0);
  }
}

TEST(Evaluate, WritesOneRecordPerSample) {
  TempDir dir;
  EvalOptions o;
  o.metrics_path = dir.path() / "eval.jsonl";
  o.batch_size = 3;
  evaluate(IdentityDecomposer(2), validation_source(tiny(ModelVariant::kC2), 7), 7, o);
  std::ifstream in(o.metrics_path);
  std::string line;
  Index id = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("id").get<Index>(), id++);
    EXPECT_NEAR(j.at("pil").get<double>(), j.at("pil_first").get<double>() + j.at("pil_second").get<double>(), 1e-12);
  }
  EXPECT_EQ(id, 7);
}

TEST(Evaluate, ValidationIsDisjointFromTraining) {
  const TrainConfig c = tiny(ModelVariant::kC2);
  const SampleSource train_src = training_source(c), val = validation_source(c, 5);
  for (Index i = 0; i < 5; ++i) EXPECT_FALSE(same(train_src.get(i).blended.frames, val.get(i).blended.frames));
}

TEST(Binomial, UpperTailMatchesDirectSum) {
  auto direct = [](Index k, Index n, double p) {
    double total = 0;
    for (Index i = k; i <= n; ++i) {
      double c = 1;
      for (Index j = 0; j < i; ++j) c = c * static_cast<double>(n - j) / static_cast<double>(j + 1);
      total += c * std::pow(p, static_cast<double>(i)) * std::pow(1 - p, static_cast<double>(n - i));
    }
    return total;
  };
  for (auto [k, n] : std::vector<std::pair<Index, Index>>{{0, 10}, {5, 10}, {9, 10}, {10, 10}, {30, 40}, {60, 100}}) {
    EXPECT_NEAR(binomial_upper_tail(k, n, 0.5), direct(k, n, 0.5), 1e-12) << k << "/" << n;
  }
  EXPECT_EQ(binomial_upper_tail(11, 10, 0.5), 0.0);
  EXPECT_LT(binomial_upper_tail(350, 500, 0.5), 1e-15);
}

TEST(ShiftAudio, ZeroFullAndBeyond) {
  const BlendSample s = gen_sprite_sample(4, BlendMode::kTransparent, 8, 16, 16);
  const AudioClip& a = *s.audio1;
  EXPECT_EQ(shift_audio(a, 0).samples, a.samples);
  const AudioClip silent = shift_audio(a, a.duration());
  for (float v : silent.samples) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(shift_audio(a, a.duration() + 0.1), std::invalid_argument);
  EXPECT_THROW(shift_audio(a, -a.duration() - 0.1), std::invalid_argument);
}

TEST(ShiftAudio, MovesContentAndNeverAddsEnergy) {
  const BlendSample s = gen_sprite_sample(5, BlendMode::kTransparent, 8, 16, 16);
  const AudioClip& a = *s.audio1;
  auto energy = [](const AudioClip& c) {
    double e = 0;
    for (float v : c.samples) e += double(v) * v;
    return e;
  };
  for (double fraction : {0.25, -0.25, 0.5, -0.9}) {
    const double offset = fraction * a.duration();
    const AudioClip b = shift_audio(a, offset);
    EXPECT_EQ(b.samples.size(), a.samples.size());
    EXPECT_LE(energy(b), energy(a) + 1e-9);
    const auto k = static_cast<std::ptrdiff_t>(std::llround(offset * a.sample_rate));
    const std::ptrdiff_t i = k > 0 ? k + 10 : 10;
    EXPECT_EQ(b.samples[static_cast<std::size_t>(i)], a.samples[static_cast<std::size_t>(i - k)]);
  }
}

TEST(OffsetSweep, ReportsEveryOffset) {
  const TrainConfig c = tiny(ModelVariant::kC3Internal);
  C3Model model(c.model);
  const SampleSource val = validation_source(c, 4);
  const double d = val.get(0).audio1->duration();
  const OffsetSweep sweep = offset_sweep(NeuralDecomposer(model), val, 4, {0, 0.25 * d, 0.5 * d, d});
  ASSERT_EQ(sweep.rows.size(), 4u);
  const EvalReport plain = evaluate(NeuralDecomposer(model), val, 4);
  EXPECT_EQ(sweep.rows[0].mean_pil, plain.mean_pil);
  EXPECT_EQ(sweep.rows[0].control_accuracy, plain.control_accuracy);
  double lo = 1e9, hi = -1e9;
  for (const auto& r : sweep.rows) {
    lo = std::min(lo, r.mean_pil);
    hi = std::max(hi, r.mean_pil);
  }
  EXPECT_NEAR(sweep.pil_spread, hi - lo, 1e-15);
}

TEST(Queue, OrderedWithWorkersAndPropagatesErrors) {
  SampleSource src = sprite_source(SpriteSourceOptions{});
  OrderedSampleQueue q(src, 3, 6, 3, 2);
  for (Index id = 3; id < 9; ++id) EXPECT_TRUE(same(q.pop().blended.frames, src.get(id).blended.frames));
  EXPECT_THROW(q.pop(), std::out_of_range);

  SampleSource bad{-1, [](Index id) -> BlendSample {
                     if (id == 2) throw std::runtime_error("broken sample");
                     return gen_sprite_sample(static_cast<std::uint64_t>(id), BlendMode::kTransparent, 2, 8, 8);
                   }};
  OrderedSampleQueue qb(bad, 0, 4, 2, 4);
  // The failure may surface early, but never after sample 2 was due.
  EXPECT_THROW(
      {
        for (int i = 0; i < 4; ++i) qb.pop();
      },
      std::runtime_error);
  EXPECT_LE(qb.delivered(), 2);
}

TEST(Export, PanelCountsAndRanges) {
  TempDir dir;
  const TrainConfig c = tiny(ModelVariant::kC2);
  C3Model model(c.model);
  const BlendSample s = validation_source(c, 1).get(0);
  const auto decs = NeuralDecomposer(model).decompose(std::span<const BlendSample>(&s, 1));
  const ExportReport r = export_visuals(s, decs[0], dir.path());
  EXPECT_EQ(r.term_panels, c.model.n * c.model.m);
  EXPECT_EQ(r.files.size(), static_cast<std::size_t>(1 + c.model.n + c.model.m + c.model.n * c.model.m));
  for (const auto& f : r.files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  EXPECT_EQ(to_byte(-0.3f), 0);
  EXPECT_EQ(to_byte(1.7f), 255);
  EXPECT_EQ(to_byte(0.5f), 128);
}

TEST(Export, IdentityOutputsLookLikeInput) {
  TempDir dir;
  const BlendSample s = gen_sprite_sample(3, BlendMode::kTransparent, 4, 16, 16);
  const auto decs = IdentityDecomposer(2).decompose(std::span<const BlendSample>(&s, 1));
  export_visuals(s, decs[0], dir.path());
  const Image input = read_png(dir.path() / "input.png");
  for (int i = 0; i < 2; ++i) {
    const Image out = read_png(dir.path() / ("output_" + std::to_string(i) + ".png"));
    EXPECT_EQ(out.width, input.width);
    EXPECT_EQ(out.height, input.height);
    EXPECT_EQ(out.pixels, input.pixels);
  }
  EXPECT_EQ(input.width, 4 * 16);
  EXPECT_EQ(input.height, 16);
}

}  // namespace
}  // namespace c3
