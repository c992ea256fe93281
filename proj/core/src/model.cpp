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

#include "c3/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace c3 {

using nlohmann::json;

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kC2:
      return "c2";
    case ModelVariant::kC3Det:
      return "c3-det";
    case ModelVariant::kC3Internal:
      return "c3-internal";
  }
  return "unknown";
}

ModelVariant model_variant_from_string(const std::string& s) {
  if (s == "c2") return ModelVariant::kC2;
  if (s == "c3-det") return ModelVariant::kC3Det;
  if (s == "c3-internal") return ModelVariant::kC3Internal;
  throw std::invalid_argument("unknown model variant '" + s + "' (expected c2, c3-det or c3-internal)");
}

void ModelConfig::validate() const {
  if (m < 1) throw std::invalid_argument("model: m must be >= 1");
  if (n < 1) throw std::invalid_argument("model: n must be >= 1");
  if (variant == ModelVariant::kC3Det && n != 2) {
    throw std::invalid_argument("model: deterministic control requires n == 2, got n=" + std::to_string(n));
  }
  if (variant == ModelVariant::kC3Internal && n < 2) {
    throw std::invalid_argument("model: internal control requires n >= 2");
  }
  if (encoder.m != m) throw std::invalid_argument("model: encoder m disagrees with model m");
  for (int level : encoder.gated_levels) {
    if (level < 0 || level >= 3) throw std::invalid_argument("model: gated level " + std::to_string(level));
    if (encoder.channels[static_cast<std::size_t>(level)] % m != 0) {
      throw std::invalid_argument("model: level " + std::to_string(level) + " has " +
                                  std::to_string(encoder.channels[static_cast<std::size_t>(level)]) +
                                  " channels, not divisible into m=" + std::to_string(m) + " groups");
    }
  }
}

C3Model::C3Model(const ModelConfig& config) : config_(config) {
  config_.encoder.m = config_.m;
  config_.validate();
  std::mt19937_64 rng(config_.init_seed);
  encoder_ = std::make_unique<Encoder>(config_.encoder, store_, rng);
  const int ca = has_audio(config_.variant) ? config_.audio.channels.back() : 0;
  if (has_audio(config_.variant)) audio_ = std::make_unique<AudioNet>(config_.audio, store_, rng);
  DecoderConfig dc;
  dc.m = config_.m;
  dc.n = config_.n;
  for (std::size_t l = 0; l < 3; ++l) {
    dc.skip_channels[l] = config_.encoder.channels[l] + (config_.audio_at_skips ? ca : 0);
  }
  dc.bottleneck_channels = config_.encoder.channels[3] + ca;
  dc.widths = config_.decoder_widths;
  dc.strides = config_.encoder.strides;
  dc.top_channels = config_.decoder_top_channels;
  dc.top_kernel = config_.decoder_top_kernel;
  dc.initial_layer_level = config_.decoder_initial_level;
  decoder_ = std::make_unique<LayerGenerator>(dc, store_, rng);
  if (config_.variant == ModelVariant::kC3Internal) {
    head_ = std::make_unique<ControlHead>(config_.head, config_.encoder.channels[3] + ca, store_, rng);
  }
}

C3Model::Forward C3Model::forward(const RVar& video, const std::optional<RVar>& spectrograms) const {
  if (has_audio(config_.variant) && !spectrograms) {
    throw std::invalid_argument("model: variant " + to_string(config_.variant) + " needs control audio");
  }
  Forward f;
  auto enc = encoder_->encode(video);
  f.masks = enc.masks;
  f.skips = enc.skips;
  f.bottleneck = enc.bottleneck;
  f.fused = enc.bottleneck;
  std::vector<RVar> skips = enc.skips;
  if (audio_) {
    if (spectrograms->dim(0) != video.dim(0)) {
      throw std::invalid_argument("model: audio batch " + std::to_string(spectrograms->dim(0)) +
                                  " differs from video batch " + std::to_string(video.dim(0)));
    }
    f.audio = (*audio_)(*spectrograms);
    f.fused = fuse(enc.bottleneck, f.audio);
    if (config_.audio_at_skips) {
      for (auto& s : skips) s = fuse(s, f.audio);
    }
  }
  auto dec = (*decoder_)(skips, f.fused, video);
  f.layers = dec.layers;
  f.coeffs = dec.coeffs;
  f.outputs = compose(dec.layers, dec.coeffs, config_.m);
  if (head_) {
    // Only the audio branch may learn from the score regression.
    RVar pooled = ops::global_avg_pool(fuse(stop_gradient(enc.bottleneck), f.audio));
    RVar emb = RVar::constant(slot_embeddings(f.outputs.value(), config_.n));
    f.scores = (*head_)(pooled, emb);
  }
  return f;
}

namespace {
json triple_json(const ops::Triple& t) { return json::array({t[0], t[1], t[2]}); }
ops::Triple triple_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }
}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["variant"] = to_string(c.variant);
  j["m"] = c.m;
  j["n"] = c.n;
  j["encoder"]["channels"] = c.encoder.channels;
  json strides = json::array();
  for (const auto& s : c.encoder.strides) strides.push_back(triple_json(s));
  j["encoder"]["strides"] = strides;
  j["encoder"]["gated_levels"] = c.encoder.gated_levels;
  j["encoder"]["mask_width"] = c.encoder.mask_width;
  j["audio"]["channels"] = c.audio.channels;
  j["audio"]["input_scale"] = c.audio.input_scale;
  j["head"]["hidden"] = c.head.hidden;
  j["decoder"]["widths"] = c.decoder_widths;
  j["decoder"]["top_channels"] = c.decoder_top_channels;
  j["decoder"]["top_kernel"] = triple_json(c.decoder_top_kernel);
  j["decoder"]["initial_level"] = c.decoder_initial_level;
  j["audio_at_skips"] = c.audio_at_skips;
  j["stft"] = {{"window", c.stft.window}, {"hop", c.stft.hop}, {"fft_size", c.stft.fft_size}};
  j["init_seed"] = c.init_seed;
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.variant = model_variant_from_string(j.at("variant").get<std::string>());
  c.m = j.at("m").get<int>();
  c.n = j.at("n").get<int>();
  c.encoder.m = c.m;
  c.encoder.channels = j.at("encoder").at("channels").get<std::array<int, 4>>();
  const auto& strides = j.at("encoder").at("strides");
  for (std::size_t i = 0; i < 4; ++i) c.encoder.strides[i] = triple_from(strides.at(i));
  c.encoder.gated_levels = j.at("encoder").at("gated_levels").get<std::vector<int>>();
  c.encoder.mask_width = j.at("encoder").at("mask_width").get<int>();
  c.audio.channels = j.at("audio").at("channels").get<std::array<int, 4>>();
  c.audio.input_scale = j.at("audio").at("input_scale").get<float>();
  c.head.hidden = j.at("head").at("hidden").get<int>();
  c.decoder_widths = j.at("decoder").at("widths").get<std::array<int, 3>>();
  c.decoder_top_channels = j.at("decoder").at("top_channels").get<int>();
  c.decoder_top_kernel = triple_from(j.at("decoder").at("top_kernel"));
  c.decoder_initial_level = j.at("decoder").value("initial_level", c.decoder_initial_level);
  c.audio_at_skips = j.at("audio_at_skips").get<bool>();
  c.stft.window = j.at("stft").at("window").get<int>();
  c.stft.hop = j.at("stft").at("hop").get<int>();
  c.stft.fft_size = j.at("stft").at("fft_size").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

void C3Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "model.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.json").string());
  out << model_config_to_json(config_) << '\n';
  out.close();
  store_.save(dir);
}

std::unique_ptr<C3Model> C3Model::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw std::runtime_error("missing " + (dir / "model.json").string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto model = std::make_unique<C3Model>(model_config_from_json(ss.str()));
  model->load_parameters(dir);
  return model;
}

void C3Model::load_parameters(const std::filesystem::path& dir) { store_.load(dir); }

}  // namespace c3
