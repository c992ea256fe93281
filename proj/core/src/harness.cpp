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

#include "c3/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "c3/io.hpp"
#include "json.hpp"

namespace c3 {

using nlohmann::json;

void TrainConfig::validate() const {
  if (model.variant == ModelVariant::kC3Det && model.n != 2) {
    throw std::invalid_argument("C3-det requires n == 2 output slots, got n=" + std::to_string(model.n));
  }
  if (model.n < 2) throw std::invalid_argument("training needs n >= 2 output slots, got n=" + std::to_string(model.n));
  for (std::size_t i = 1; i < lr.decay_steps.size(); ++i) {
    if (lr.decay_steps[i] <= lr.decay_steps[i - 1]) {
      throw std::invalid_argument("learning-rate decay steps must be strictly increasing");
    }
  }
  if (!(lr.initial > 0) || !(lr.factor > 0)) throw std::invalid_argument("learning rate and decay factor must be positive");
  if (!(control_lr_scale > 0)) throw std::invalid_argument("control lr scale must be positive");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (render_size != 0 && (render_size < width || render_size < height)) {
    throw std::invalid_argument("render size must cover the crop");
  }
  ModelConfig mc = model;
  mc.encoder.m = mc.m;
  mc.validate();
  Index st = 2, sw = 4, sh = 4, pt = 1, pw = 1, ph = 1;
  for (const auto& s : mc.encoder.strides) {
    pt *= s[0];
    pw *= s[1];
    ph *= s[2];
  }
  st = std::max(st, pt);
  sw = std::max(sw, pw);
  sh = std::max(sh, ph);
  if (frames % st || width % sw || height % sh) {
    throw std::invalid_argument("clip " + std::to_string(frames) + "x" + std::to_string(width) + "x" +
                                std::to_string(height) + " is not divisible by the stride schedule " +
                                std::to_string(st) + "x" + std::to_string(sw) + "x" + std::to_string(sh));
  }
}

TrainConfig desk_preset(ModelVariant variant, BlendMode mode) {
  TrainConfig c;
  c.model.variant = variant;
  const int slots = (variant == ModelVariant::kC2 && mode == BlendMode::kTransparent) ? 4 : 2;
  c.model.m = c.model.n = slots;
  c.model.encoder.m = slots;
  c.blend_mode = mode;
  c.batch_size = 8;
  c.steps = 2000;
  c.lr = {1.0, {8000}, 0.1};
  c.control_lr_scale = 0.02;
  c.frames = 8;
  c.width = c.height = 32;
  return c;
}

TrainConfig full_preset(ModelVariant variant, BlendMode mode) {
  TrainConfig c;
  c.model.variant = variant;
  const int slots = variant == ModelVariant::kC2 ? 4 : 2;
  c.model.m = c.model.n = slots;
  c.model.encoder.m = slots;
  c.blend_mode = mode;
  c.batch_size = 128;
  c.steps = 124000;
  c.lr = {0.5, {80000, 100000, 120000}, 0.1};
  c.control_lr_scale = 0.04;
  c.frames = 64;
  c.width = c.height = 128;
  c.render_size = 148;
  c.model.decoder_initial_level = 0.5f;
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["model"] = json::parse(model_config_to_json(c.model));
  j["blend_mode"] = to_string(c.blend_mode);
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["lr"] = {{"initial", c.lr.initial}, {"decay_steps", c.lr.decay_steps}, {"factor", c.lr.factor}};
  j["momentum"] = c.momentum;
  j["control_lr_scale"] = c.control_lr_scale;
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["width"] = c.width;
  j["height"] = c.height;
  j["render_size"] = c.render_size;
  j["dataset_dir"] = c.dataset_dir.string();
  j["output_dir"] = c.output_dir.string();
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  j["workers"] = c.workers;
  j["queue_capacity"] = c.queue_capacity;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text, TrainConfig c) {
  const json j = json::parse(text);
  if (j.contains("model")) {
    json merged = json::parse(model_config_to_json(c.model));
    merged.merge_patch(j.at("model"));
    c.model = model_config_from_json(merged.dump());
  }
  if (j.contains("variant")) c.model.variant = model_variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("m")) c.model.m = c.model.encoder.m = j.at("m").get<int>();
  if (j.contains("n")) c.model.n = j.at("n").get<int>();
  if (j.contains("blend_mode")) c.blend_mode = blend_mode_from_string(j.at("blend_mode").get<std::string>());
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("steps")) c.steps = j.at("steps").get<long>();
  if (j.contains("lr")) {
    const auto& lr = j.at("lr");
    if (lr.is_number()) {
      c.lr.initial = lr.get<double>();
    } else {
      if (lr.contains("initial")) c.lr.initial = lr.at("initial").get<double>();
      if (lr.contains("decay_steps")) c.lr.decay_steps = lr.at("decay_steps").get<std::vector<long>>();
      if (lr.contains("factor")) c.lr.factor = lr.at("factor").get<double>();
    }
  }
  if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
  if (j.contains("control_lr_scale")) c.control_lr_scale = j.at("control_lr_scale").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("frames")) c.frames = j.at("frames").get<Index>();
  if (j.contains("width")) c.width = j.at("width").get<Index>();
  if (j.contains("height")) c.height = j.at("height").get<Index>();
  if (j.contains("render_size")) c.render_size = j.at("render_size").get<Index>();
  if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("checkpoint_every")) c.checkpoint_every = j.at("checkpoint_every").get<long>();
  if (j.contains("log_every")) c.log_every = j.at("log_every").get<long>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("queue_capacity")) c.queue_capacity = j.at("queue_capacity").get<int>();
  return c;
}

namespace {

SpriteSourceOptions sprite_options(const TrainConfig& c) {
  SpriteSourceOptions o;
  o.seed = c.seed;
  o.mode = c.blend_mode;
  o.frames = c.frames;
  o.width = c.width;
  o.height = c.height;
  o.render_size = c.render_size;
  return o;
}

std::optional<RVar> spectrogram_input(const Batch& b) {
  if (!b.spectrograms) return std::nullopt;
  return RVar::constant(*b.spectrograms);
}

bool finite(double x) { return std::isfinite(x); }

std::filesystem::path dump_batch(const std::filesystem::path& root, long step, std::span<const BlendSample> samples) {
  const auto dir = (root.empty() ? std::filesystem::temp_directory_path() : root) /
                   ("nonfinite_step_" + std::to_string(step));
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.records.push_back(io::write_blend_sample(dir, "sample" + std::to_string(i), samples[i]));
  }
  io::write_manifest(dir / "manifest.jsonl", m);
  return dir;
}

json step_json(const StepRecord& r) {
  json j = {{"step", r.step}, {"loss", r.loss}, {"lr", r.lr}};
  for (const auto& [k, v] : r.parts) j[k] = v;
  return j;
}

}  // namespace

SampleSource training_source(const TrainConfig& config) {
  if (!config.dataset_dir.empty()) return manifest_source(config.dataset_dir);
  return sprite_source(sprite_options(config));
}

SampleSource validation_source(const TrainConfig& config, Index count) {
  if (!config.dataset_dir.empty()) return manifest_source(config.dataset_dir);
  auto o = sprite_options(config);
  o.count = count;
  return validation_sprite_source(o);
}

BatchLoss batch_loss(const C3Model& model, const Batch& batch) {
  const ModelConfig& mc = model.config();
  auto f = model.forward(RVar::constant(batch.blended), spectrogram_input(batch));
  RVar v1 = RVar::constant(batch.v1);
  RVar v2 = RVar::constant(batch.v2);
  BatchLoss out;
  if (mc.variant == ModelVariant::kC3Det) {
    out.total = batched::det_loss(v1, v2, f.outputs, mc.n);
    out.parts["det"] = out.total.value()[0];
  } else {
    out.total = batched::pil_loss(v1, v2, f.outputs, mc.n).loss;
    out.parts["pil"] = out.total.value()[0];
  }
  if (mc.variant == ModelVariant::kC3Internal) {
    RVar reg = batched::reg_loss(v1, f.scores, f.outputs, mc.n);
    out.parts["reg"] = reg.value()[0];
    out.total = ops::add(out.total, reg);
  }
  return out;
}

TrainReport train(const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  C3Model model(config.model);
  return train(model, config, on_step);
}

TrainReport train(C3Model& model, const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool audio = has_audio(model.config().variant);
  MomentumSgd opt(config.momentum);
  if (model.config().variant == ModelVariant::kC3Internal) {
    opt.set_lr_scale("audio/", config.control_lr_scale);
    opt.set_lr_scale("control/", config.control_lr_scale);
  }
  OrderedSampleQueue queue(training_source(config), 0, config.steps * config.batch_size, config.workers,
                           config.queue_capacity);
  std::ofstream metrics;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    metrics.open(config.output_dir / "train_metrics.jsonl");
  }
  TrainReport report;
  std::vector<BlendSample> samples;
  for (long step = 0; step < config.steps; ++step) {
    samples.clear();
    for (int i = 0; i < config.batch_size; ++i) samples.push_back(queue.pop());
    const Batch batch = make_batch(samples, audio, model.config().stft);
    BatchLoss loss = batch_loss(model, batch);
    const double value = loss.total.value()[0];
    if (!finite(value)) {
      const auto dir = dump_batch(config.output_dir, step, samples);
      throw NonFiniteLossError("non-finite loss at step " + std::to_string(step) + "; batch written to " +
                                   dir.string(),
                               dir);
    }
    model.parameters().zero_grad();
    backward(loss.total);
    const double lr = config.lr.at(step);
    opt.step(model.parameters(), lr);

    StepRecord rec{step, value, lr, loss.parts};
    report.curve.push_back(rec);
    if (metrics.is_open() && (step % std::max(config.log_every, 1L) == 0 || step + 1 == config.steps)) {
      metrics << step_json(rec).dump() << '\n';
      metrics.flush();
    }
    if (config.checkpoint_every > 0 && !config.output_dir.empty() && (step + 1) % config.checkpoint_every == 0) {
      model.save(config.output_dir / ("step_" + std::to_string(step + 1)));
    }
    if (on_step && !on_step(rec)) break;
  }
  if (!config.output_dir.empty()) {
    report.checkpoint = config.output_dir / "checkpoint";
    model.save(report.checkpoint);
    std::ofstream(config.output_dir / "train_config.json") << train_config_to_json(config) << '\n';
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<Decomposition> IdentityDecomposer::decompose(std::span<const BlendSample> samples) const {
  std::vector<Decomposition> out;
  for (const auto& s : samples) {
    const Shape& sh = s.blended.frames.shape();
    Decomposition d;
    d.layers.layers = s.blended.frames.reshaped({sh[0], sh[1], sh[2], 1, 3});
    d.coeffs.coeffs = Tensor<float>({sh[0], sh[1], sh[2], n_, 1}, 1.0f);
    d.outputs = compose(d.layers, d.coeffs);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Decomposition> OracleDecomposer::decompose(std::span<const BlendSample> samples) const {
  std::vector<Decomposition> out;
  for (const auto& s : samples) {
    const Shape& sh = s.blended.frames.shape();
    const Index pixels = sh[0] * sh[1] * sh[2];
    Decomposition d;
    d.layers.layers = Tensor<float>({sh[0], sh[1], sh[2], 2, 3});
    d.coeffs.coeffs = Tensor<float>({sh[0], sh[1], sh[2], 2, 2});
    for (Index p = 0; p < pixels; ++p) {
      for (Index c = 0; c < 3; ++c) {
        d.layers.layers[p * 6 + c] = s.v1.frames[p * 3 + c];
        d.layers.layers[p * 6 + 3 + c] = s.v2.frames[p * 3 + c];
      }
      d.coeffs.coeffs[p * 4 + 0] = 1.0f;  // slot 0 <- layer 0
      d.coeffs.coeffs[p * 4 + 3] = 1.0f;  // slot 1 <- layer 1
    }
    d.outputs = compose(d.layers, d.coeffs);
    d.selected = 0;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Decomposition> NeuralDecomposer::decompose(std::span<const BlendSample> samples) const {
  const ModelConfig& mc = model_.config();
  const Batch batch = make_batch(samples, has_audio(mc.variant), mc.stft);
  auto f = model_.forward(RVar::constant(batch.blended), spectrogram_input(batch));
  const Shape& vs = batch.blended.shape();
  const Index per = vs[1] * vs[2] * vs[3];
  std::vector<Decomposition> out;
  for (Index b = 0; b < vs[0]; ++b) {
    Decomposition d;
    auto slice = [&](const Tensor<float>& t, Index a, Index c) {
      const Index len = per * a * c;
      std::vector<float> v(t.data() + b * len, t.data() + (b + 1) * len);
      return Tensor<float>({vs[1], vs[2], vs[3], a, c}, std::move(v));
    };
    d.layers.layers = slice(f.layers.value(), mc.m, 3);
    d.coeffs.coeffs = slice(f.coeffs.value(), mc.n, mc.m);
    d.outputs.outputs = slice(f.outputs.value(), mc.n, 3);
    if (mc.variant == ModelVariant::kC3Internal) {
      d.scores.assign(f.scores.value().data() + b * mc.n, f.scores.value().data() + (b + 1) * mc.n);
      d.selected = select_slot(d.scores);
    } else if (mc.variant == ModelVariant::kC3Det) {
      d.selected = 0;
    }
    out.push_back(std::move(d));
  }
  return out;
}

double binomial_upper_tail(Index k, Index n, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0;
  for (Index i = k; i <= n; ++i) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                            i * std::log(p) + (n - i) * std::log1p(-p);
    total += std::exp(log_term);
  }
  return std::min(total, 1.0);
}

AudioClip shift_audio(const AudioClip& a, double offset) {
  if (std::abs(offset) > a.duration() + 1e-9) {
    throw std::invalid_argument("shift_audio: offset " + std::to_string(offset) + " s exceeds the " +
                                std::to_string(a.duration()) + " s clip");
  }
  const auto len = static_cast<long long>(a.samples.size());
  const long long k = std::llround(offset * a.sample_rate);
  AudioClip out;
  out.sample_rate = a.sample_rate;
  out.samples.assign(a.samples.size(), 0.0f);
  for (long long i = 0; i < len; ++i) {
    const long long src = i - k;
    if (src >= 0 && src < len) out.samples[static_cast<std::size_t>(i)] = a.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

EvalReport evaluate(const Decomposer& decomposer, const SampleSource& samples, Index count,
                    const EvalOptions& options) {
  if (samples.count >= 0 && count > samples.count) {
    throw std::invalid_argument("evaluate: asked for " + std::to_string(count) + " samples from a set of " +
                                std::to_string(samples.count));
  }
  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    if (options.metrics_path.has_parent_path()) std::filesystem::create_directories(options.metrics_path.parent_path());
    metrics.open(options.metrics_path);
    if (!metrics) throw std::runtime_error("cannot write " + options.metrics_path.string());
  }
  std::mt19937_64 chance(options.chance_seed);
  EvalReport report;
  double pil_sum = 0;
  const int n = decomposer.slots();
  for (Index first = 0; first < count; first += options.batch_size) {
    const Index last = std::min<Index>(count, first + options.batch_size);
    std::vector<BlendSample> batch;
    for (Index id = first; id < last; ++id) {
      BlendSample s = samples.get(id);
      if (options.audio_offset != 0 && s.audio1) s.audio1 = shift_audio(*s.audio1, options.audio_offset);
      batch.push_back(std::move(s));
    }
    const auto decs = decomposer.decompose(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Decomposition& d = decs[i];
      const auto first_losses = slot_losses(batch[i].v1, d.outputs);
      const auto second_losses = slot_losses(batch[i].v2, d.outputs);
      const PilResult pil = pil_from_matrix({first_losses, second_losses});
      const int chosen = d.selected >= 0 ? d.selected : std::uniform_int_distribution<int>(0, n - 1)(chance);
      const ControlJudgement j = judge_control(first_losses, chosen);
      pil_sum += pil.loss.value;
      report.correct += j.correct ? 1 : 0;
      if (metrics.is_open()) {
        json rec = {{"id", first + static_cast<Index>(i)},
                    {"pil", pil.loss.value},
                    {"pil_first", pil.loss.breakdown.at("first")},
                    {"pil_second", pil.loss.breakdown.at("second")},
                    {"assignment", {pil.assignment.first, pil.assignment.second}},
                    {"slot_losses", first_losses},
                    {"chosen", chosen},
                    {"threshold", j.threshold},
                    {"correct", j.correct}};
        if (!d.scores.empty()) rec["scores"] = d.scores;
        metrics << rec.dump() << '\n';
      }
    }
  }
  report.count = count;
  if (count > 0) {
    report.mean_pil = pil_sum / static_cast<double>(count);
    report.mean_pil_per_target = report.mean_pil / 2.0;
    report.control_accuracy = static_cast<double>(report.correct) / static_cast<double>(count);
  }
  report.chance_p_value = binomial_upper_tail(report.correct, count, 0.5);
  return report;
}

OffsetSweep offset_sweep(const Decomposer& decomposer, const SampleSource& samples, Index count,
                         const std::vector<double>& offsets, const EvalOptions& options) {
  OffsetSweep sweep;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double offset : offsets) {
    EvalOptions o = options;
    o.audio_offset = offset;
    if (!options.metrics_path.empty()) {
      o.metrics_path = options.metrics_path;
      o.metrics_path.replace_filename(options.metrics_path.stem().string() + "_offset" + std::to_string(offset) +
                                      options.metrics_path.extension().string());
    }
    const EvalReport r = evaluate(decomposer, samples, count, o);
    sweep.rows.push_back({offset, r.control_accuracy, r.mean_pil});
    lo = std::min(lo, r.mean_pil);
    hi = std::max(hi, r.mean_pil);
  }
  sweep.pil_spread = sweep.rows.empty() ? 0 : hi - lo;
  return sweep;
}

}  // namespace c3
