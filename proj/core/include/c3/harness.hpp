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

// Training, evaluation and the audio-offset experiment.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "c3/data.hpp"
#include "c3/losses.hpp"
#include "c3/model.hpp"

namespace c3 {

struct TrainConfig {
  ModelConfig model;
  BlendMode blend_mode = BlendMode::kTransparent;
  int batch_size = 8;
  long steps = 2000;
  LearningRateSchedule lr{0.05, {}, 0.1};
  double momentum = 0.9;
  // Rate multiplier for audio/ and control/ parameters under internal control.
  double control_lr_scale = 1.0;
  std::uint64_t seed = 1;
  Index frames = 8;
  Index width = 32;
  Index height = 32;
  Index render_size = 0;  // > width: render larger and crop
  // Empty: procedural sprites. Otherwise a directory holding manifest.jsonl.
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir;
  long checkpoint_every = 0;  // 0: final checkpoint only
  long log_every = 100;
  int workers = 0;
  int queue_capacity = 32;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

TrainConfig desk_preset(ModelVariant variant, BlendMode mode);
TrainConfig full_preset(ModelVariant variant, BlendMode mode);

std::string train_config_to_json(const TrainConfig& c);
// Fields missing from `text` keep the values of `base`.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base);

struct StepRecord {
  long step = 0;
  double loss = 0;
  double lr = 0;
  std::map<std::string, double> parts;
};

struct TrainReport {
  std::vector<StepRecord> curve;
  std::filesystem::path checkpoint;
  double seconds = 0;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, std::filesystem::path dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::filesystem::path& dump() const { return dump_; }

 private:
  std::filesystem::path dump_;
};

// Loss of one batch under the variant's objective. The returned scalar is
// ready for backward().
struct BatchLoss {
  RVar total;
  std::map<std::string, double> parts;
};
BatchLoss batch_loss(const C3Model& model, const Batch& batch);

// Called after every step; return false to stop early.
using StepCallback = std::function<bool(const StepRecord&)>;

TrainReport train(const TrainConfig& config, const StepCallback& on_step = {});
// Trains an existing model in place (used to resume or to probe steps).
TrainReport train(C3Model& model, const TrainConfig& config, const StepCallback& on_step = {});

SampleSource training_source(const TrainConfig& config);
SampleSource validation_source(const TrainConfig& config, Index count);

// One decomposed clip. Layer and coefficient sets are kept for export.
struct Decomposition {
  LayerSet layers;
  CoeffSet coeffs;
  OutputSet outputs;
  std::vector<float> scores;  // empty without internal control
  int selected = -1;          // -1: no selector, a chance slot is drawn
};

class Decomposer {
 public:
  virtual ~Decomposer() = default;
  virtual int slots() const = 0;
  virtual std::vector<Decomposition> decompose(std::span<const BlendSample> samples) const = 0;
};

// Outputs are n copies of the blended input.
class IdentityDecomposer : public Decomposer {
 public:
  explicit IdentityDecomposer(int n = 2) : n_(n) {}
  int slots() const override { return n_; }
  std::vector<Decomposition> decompose(std::span<const BlendSample> samples) const override;

 private:
  int n_;
};

// Returns the ground-truth pair (v1 in slot 0) and selects slot 0.
class OracleDecomposer : public Decomposer {
 public:
  int slots() const override { return 2; }
  std::vector<Decomposition> decompose(std::span<const BlendSample> samples) const override;
};

class NeuralDecomposer : public Decomposer {
 public:
  explicit NeuralDecomposer(const C3Model& model) : model_(model) {}
  int slots() const override { return model_.config().n; }
  std::vector<Decomposition> decompose(std::span<const BlendSample> samples) const override;

 private:
  const C3Model& model_;
};

struct EvalOptions {
  int batch_size = 8;
  std::uint64_t chance_seed = 7;
  double audio_offset = 0;  // seconds, applied to control audio
  std::filesystem::path metrics_path;  // JSONL, one record per sample
};

struct EvalReport {
  Index count = 0;
  double mean_pil = 0;         // l(V1,O_i) + l(V2,O_j) at the best pair
  double mean_pil_per_target = 0;
  Index correct = 0;
  double control_accuracy = 0;
  double chance_p_value = 1;   // one-sided binomial test against 0.5
};

EvalReport evaluate(const Decomposer& decomposer, const SampleSource& samples, Index count,
                    const EvalOptions& options = {});

// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(Index k, Index n, double p);

// Content moves later by `offset` seconds (earlier when negative); the
// vacated span is silent. Throws when |offset| exceeds the clip duration.
AudioClip shift_audio(const AudioClip& a, double offset);

struct OffsetRow {
  double offset = 0;
  double control_accuracy = 0;
  double mean_pil = 0;
};

struct OffsetSweep {
  std::vector<OffsetRow> rows;
  double pil_spread = 0;  // max - min of the reconstruction column
};

OffsetSweep offset_sweep(const Decomposer& decomposer, const SampleSource& samples, Index count,
                         const std::vector<double>& offsets, const EvalOptions& options = {});

}  // namespace c3
