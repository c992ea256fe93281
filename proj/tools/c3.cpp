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

// Command-line front end: gen, train, eval, sweep-offset, export.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "c3/harness.hpp"
#include "c3/io.hpp"
#include "c3/visuals.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace c3 {
namespace {

// Relative output paths land under $C3_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
  const char* root = std::getenv("C3_OUTPUT_ROOT");
  if (p.is_absolute() || !root || !*root) return p;
  return fs::path(root) / p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared by every verb that needs a clip configuration.
struct ConfigFlags {
  std::string preset = "desk";
  fs::path config_file;
  std::optional<std::string> variant, mode, dataset;
  std::optional<long> steps, seed, frames, size;
  std::optional<int> batch, workers, m, n;
  std::optional<double> lr;

  void add(CLI::App& app) {
    app.add_option("--preset", preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    app.add_option("--config", config_file, "JSON training config; flags override it")->check(CLI::ExistingFile);
    app.add_option("--variant", variant, "c2, c3-det or c3-internal");
    app.add_option("--mode", mode, "transparent or occlusion");
    app.add_option("--dataset", dataset, "Directory with manifest.jsonl (default: procedural sprites)");
    app.add_option("--steps", steps);
    app.add_option("--seed", seed);
    app.add_option("--frames", frames);
    app.add_option("--size", size, "Clip width and height");
    app.add_option("--batch", batch);
    app.add_option("--workers", workers, "Sample producer threads (0: inline)");
    app.add_option("--lr", lr, "Initial learning rate");
    app.add_option("-m", m, "Layers");
    app.add_option("-n", n, "Output slots");
  }

  TrainConfig resolve() const {
    json file;
    if (!config_file.empty()) file = json::parse(slurp(config_file));
    auto pick = [&](const std::optional<std::string>& flag, const char* key, const char* fallback) {
      if (flag) return *flag;
      if (file.contains(key)) return file.at(key).get<std::string>();
      if (file.contains("model") && file.at("model").contains(key)) return file.at("model").at(key).get<std::string>();
      return std::string(fallback);
    };
    const ModelVariant v = model_variant_from_string(pick(variant, "variant", "c2"));
    const BlendMode bm = blend_mode_from_string(pick(mode, "blend_mode", "transparent"));
    TrainConfig c = preset == "full" ? full_preset(v, bm) : desk_preset(v, bm);
    if (!file.is_null()) c = train_config_from_json(file.dump(), c);
    c.model.variant = v;
    c.blend_mode = bm;
    if (dataset) c.dataset_dir = *dataset;
    if (steps) c.steps = *steps;
    if (seed) c.seed = static_cast<std::uint64_t>(*seed);
    if (frames) c.frames = *frames;
    if (size) c.width = c.height = *size;
    if (batch) c.batch_size = *batch;
    if (workers) c.workers = *workers;
    if (lr) c.lr.initial = *lr;
    if (m) c.model.m = c.model.encoder.m = *m;
    if (n) c.model.n = *n;
    return c;
  }
};

void print_json(const json& j) { std::cout << j.dump() << std::endl; }

json report_json(const EvalReport& r) {
  return {{"count", r.count},
          {"mean_pil", r.mean_pil},
          {"mean_pil_per_target", r.mean_pil_per_target},
          {"correct", r.correct},
          {"control_accuracy", r.control_accuracy},
          {"chance_p_value", r.chance_p_value}};
}

// --checkpoint, or one of the reference decomposers.
struct DecomposerFlags {
  fs::path checkpoint;
  bool identity = false;
  bool oracle = false;

  void add(CLI::App& app) {
    auto* ck = app.add_option("--checkpoint", checkpoint, "Directory holding model.json")->check(CLI::ExistingDirectory);
    auto* id = app.add_flag("--identity", identity, "Outputs are copies of the input");
    auto* orc = app.add_flag("--oracle", oracle, "Outputs are the ground-truth pair");
    ck->excludes(id)->excludes(orc);
    id->excludes(orc);
  }

  struct Loaded {
    std::unique_ptr<C3Model> model;
    std::unique_ptr<Decomposer> decomposer;
  };

  Loaded load(int slots) const {
    Loaded out;
    if (identity) {
      out.decomposer = std::make_unique<IdentityDecomposer>(slots);
    } else if (oracle) {
      out.decomposer = std::make_unique<OracleDecomposer>();
    } else {
      if (checkpoint.empty()) throw CLI::ValidationError("one of --checkpoint, --identity or --oracle is required");
      out.model = C3Model::load(checkpoint);
      out.decomposer = std::make_unique<NeuralDecomposer>(*out.model);
    }
    return out;
  }
};

// A checkpoint written by `train` sits next to the run's train_config.json.
TrainConfig eval_config(ConfigFlags flags, const DecomposerFlags& d) {
  if (!d.checkpoint.empty()) {
    const ModelConfig mc = model_config_from_json(slurp(d.checkpoint / "model.json"));
    if (!flags.variant) flags.variant = to_string(mc.variant);
    const fs::path run_config = d.checkpoint.parent_path() / "train_config.json";
    if (flags.config_file.empty() && fs::exists(run_config)) flags.config_file = run_config;
    TrainConfig c = flags.resolve();
    c.model = mc;
    return c;
  }
  return flags.resolve();
}

int run_gen(const ConfigFlags& flags, const fs::path& out_arg, long count) {
  const TrainConfig c = flags.resolve();
  const fs::path out = output_path(out_arg);
  fs::create_directories(out);
  SpriteSourceOptions o;
  o.seed = c.seed;
  o.mode = c.blend_mode;
  o.frames = c.frames;
  o.width = c.width;
  o.height = c.height;
  o.render_size = c.render_size;
  const SampleSource src = sprite_source(o);
  DatasetManifest manifest;
  manifest.seed = c.seed;
  for (long i = 0; i < count; ++i) {
    const BlendSample s = src.get(i);
    const auto problems = validate_blend_sample(s);
    if (!problems.empty()) throw std::runtime_error("sample " + std::to_string(i) + ": " + problems.front());
    char id[32];
    std::snprintf(id, sizeof id, "clip%06ld", i);
    manifest.records.push_back(io::write_blend_sample(out, id, s));
  }
  io::write_manifest(out / "manifest.jsonl", manifest);
  print_json({{"written", count}, {"dir", out.string()}, {"mode", to_string(c.blend_mode)}});
  return 0;
}

int run_train(const ConfigFlags& flags, const fs::path& out_arg, long checkpoint_every, long log_every) {
  TrainConfig c = flags.resolve();
  c.output_dir = output_path(out_arg);
  c.checkpoint_every = checkpoint_every;
  c.log_every = log_every;
  const TrainReport r = train(c, [&](const StepRecord& rec) {
    if (rec.step % std::max(log_every, 1L) == 0) {
      std::cerr << "step " << rec.step << " loss " << rec.loss << " lr " << rec.lr << '\n';
    }
    return true;
  });
  print_json({{"steps", r.curve.size()},
              {"first_loss", r.curve.empty() ? 0.0 : r.curve.front().loss},
              {"last_loss", r.curve.empty() ? 0.0 : r.curve.back().loss},
              {"seconds", r.seconds},
              {"checkpoint", r.checkpoint.string()}});
  return 0;
}

int run_eval(const ConfigFlags& flags, const DecomposerFlags& d, long count, const fs::path& metrics) {
  const TrainConfig c = eval_config(flags, d);
  const auto loaded = d.load(c.model.n);
  const SampleSource val = validation_source(c, count);
  EvalOptions o;
  if (!metrics.empty()) o.metrics_path = output_path(metrics);
  const EvalReport r = evaluate(*loaded.decomposer, val, val.count >= 0 ? std::min<Index>(count, val.count) : count, o);
  print_json(report_json(r));
  return 0;
}

int run_sweep(const ConfigFlags& flags, const DecomposerFlags& d, long count, std::vector<double> fractions,
              const fs::path& metrics) {
  const TrainConfig c = eval_config(flags, d);
  const auto loaded = d.load(c.model.n);
  const SampleSource val = validation_source(c, count);
  const BlendSample first = val.get(0);
  if (!first.audio1) throw std::runtime_error("sweep-offset: samples carry no control audio");
  const double duration = first.audio1->duration();
  std::vector<double> offsets;
  for (double f : fractions) offsets.push_back(f * duration);
  EvalOptions o;
  if (!metrics.empty()) o.metrics_path = output_path(metrics);
  const OffsetSweep sweep = offset_sweep(*loaded.decomposer, val, count, offsets, o);
  for (const auto& row : sweep.rows) {
    print_json({{"offset", row.offset}, {"control_accuracy", row.control_accuracy}, {"mean_pil", row.mean_pil}});
  }
  print_json({{"pil_spread", sweep.pil_spread}, {"duration", duration}});
  return 0;
}

int run_export(const ConfigFlags& flags, const DecomposerFlags& d, long sample, const fs::path& out_arg) {
  const TrainConfig c = eval_config(flags, d);
  const auto loaded = d.load(c.model.n);
  const BlendSample s = validation_source(c, sample + 1).get(sample);
  const auto decs = loaded.decomposer->decompose(std::span<const BlendSample>(&s, 1));
  const ExportReport r = export_visuals(s, decs.front(), output_path(out_arg));
  json files = json::array();
  for (const auto& f : r.files) files.push_back(f.string());
  print_json({{"term_panels", r.term_panels}, {"files", files}});
  return 0;
}

}  // namespace
}  // namespace c3

int main(int argc, char** argv) {
  using namespace c3;
  CLI::App app{"Compositional video decomposition with audio control"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, eval_flags, sweep_flags, export_flags;
  DecomposerFlags eval_model, sweep_model, export_model;
  fs::path gen_out = "dataset", train_out = "run", eval_metrics, sweep_metrics, export_out = "export";
  long gen_count = 100, checkpoint_every = 0, log_every = 100, eval_count = 500, sweep_count = 500, export_sample = 0;
  std::vector<double> fractions{0, 0.25, 0.5, 1.0};

  auto* gen = app.add_subcommand("gen", "Write a blended sprite dataset with a manifest");
  gen_flags.add(*gen);
  gen->add_option("--out", gen_out);
  gen->add_option("--count", gen_count)->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoints and train_metrics.jsonl");
  train_flags.add(*tr);
  tr->add_option("--out", train_out);
  tr->add_option("--checkpoint-every", checkpoint_every);
  tr->add_option("--log-every", log_every);

  auto* ev = app.add_subcommand("eval", "Evaluate on the held-out split");
  eval_flags.add(*ev);
  eval_model.add(*ev);
  ev->add_option("--count", eval_count)->check(CLI::PositiveNumber);
  ev->add_option("--metrics", eval_metrics, "Per-sample JSONL");

  auto* sw = app.add_subcommand("sweep-offset", "Shift the control audio and re-evaluate");
  sweep_flags.add(*sw);
  sweep_model.add(*sw);
  sw->add_option("--count", sweep_count)->check(CLI::PositiveNumber);
  sw->add_option("--fractions", fractions, "Offsets as fractions of the clip duration")->delimiter(',');
  sw->add_option("--metrics", sweep_metrics, "Per-sample JSONL (one file per offset)");

  auto* ex = app.add_subcommand("export", "Write PNG strips of input, outputs, layers and terms");
  export_flags.add(*ex);
  export_model.add(*ex);
  ex->add_option("--sample", export_sample, "Held-out sample index");
  ex->add_option("--out", export_out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return run_gen(gen_flags, gen_out, gen_count);
    if (tr->parsed()) return run_train(train_flags, train_out, checkpoint_every, log_every);
    if (ev->parsed()) return run_eval(eval_flags, eval_model, eval_count, eval_metrics);
    if (sw->parsed()) return run_sweep(sweep_flags, sweep_model, sweep_count, fractions, sweep_metrics);
    if (ex->parsed()) return run_export(export_flags, export_model, export_sample, export_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
