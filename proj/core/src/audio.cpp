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

#include "c3/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace c3 {
namespace {

// FFTW planning is not thread-safe; execution on plan-owned buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftwf_alloc_real(static_cast<std::size_t>(n));
    out_ = fftwf_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan_ = fftwf_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("fftw: cannot plan a real FFT of size " + std::to_string(n));
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftwf_destroy_plan(plan_);
    }
    fftwf_free(in_);
    fftwf_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  float* input() { return in_; }
  void run() { fftwf_execute(plan_); }
  double magnitude(int k) const { return std::hypot(double{out_[k][0]}, double{out_[k][1]}); }

 private:
  int n_;
  float* in_ = nullptr;
  fftwf_complex* out_ = nullptr;
  fftwf_plan plan_ = nullptr;
};

}  // namespace

Index StftParams::frames(Index samples) const {
  if (samples <= window) return 1;
  return (samples - window) / hop + 1;
}

Spectrogram compute_log_spectrogram(const AudioClip& a, const StftParams& params) {
  if (a.samples.empty()) throw std::invalid_argument("compute_log_spectrogram: empty clip");
  if (params.window < 1 || params.hop < 1 || params.fft_size < params.window) {
    throw std::invalid_argument("compute_log_spectrogram: need window <= fft_size and positive hop");
  }
  const Index len = static_cast<Index>(a.samples.size());
  const Index frames = params.frames(len);
  const int bins = params.bins();
  std::vector<float> hann(static_cast<std::size_t>(params.window));
  for (int i = 0; i < params.window; ++i) {
    // Periodic Hann window.
    hann[static_cast<std::size_t>(i)] =
        static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / params.window));
  }
  Spectrogram out;
  out.params = params;
  out.values = Tensor<float>({frames, bins});
  RealFft fft(params.fft_size);
  for (Index f = 0; f < frames; ++f) {
    float* in = fft.input();
    std::fill(in, in + params.fft_size, 0.0f);
    for (int i = 0; i < params.window; ++i) {
      const Index s = f * params.hop + i;
      if (s < len) in[i] = a.samples[static_cast<std::size_t>(s)] * hann[static_cast<std::size_t>(i)];
    }
    fft.run();
    for (int k = 0; k < bins; ++k) {
      out.values[f * bins + k] = static_cast<float>(std::log(fft.magnitude(k) + double{params.floor}));
    }
  }
  return out;
}

AudioNet::AudioNet(const AudioNetConfig& config, ParameterStore& store, std::mt19937_64& rng) : config_(config) {
  int in = 2;
  for (std::size_t i = 0; i < config_.channels.size(); ++i) {
    blocks_.push_back(Conv3dLayer::create(store, "audio/conv" + std::to_string(i), {1, 3, 3}, in,
                                          config_.channels[i], {1, 1, 1}, rng));
    in = config_.channels[i];
  }
}

std::array<Index, 2> AudioNet::out_shape(Index ta, Index f) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    ta /= 2;
    f /= 2;
  }
  return {ta, f};
}

RVar AudioNet::operator()(const RVar& spectrograms) const {
  if (spectrograms.value().rank() != 3) {
    throw std::invalid_argument("audio net: expected [N,T_a,F] spectrograms, got " +
                                shape_string(spectrograms.shape()));
  }
  const Index n = spectrograms.dim(0);
  const Index ta = spectrograms.dim(1);
  const Index f = spectrograms.dim(2);
  const auto [ta_out, f_out] = out_shape(ta, f);
  if (ta_out < 1 || f_out < 1) {
    throw std::invalid_argument("audio net: spectrogram " + shape_string(spectrograms.shape()) +
                                " is too small for " + std::to_string(blocks_.size()) + " pooling blocks");
  }
  // Channel 0: scaled log magnitude. Channel 1: the same weighted by the
  // normalised frequency coordinate.
  Tensor<float> coord({n, 1, ta, f, 2});
  for (Index b = 0; b < n; ++b)
    for (Index t = 0; t < ta; ++t)
      for (Index k = 0; k < f; ++k) {
        const float phi = f > 1 ? static_cast<float>(k) / static_cast<float>(f - 1) : 0.0f;
        coord[((b * ta + t) * f + k) * 2 + 0] = config_.input_scale;
        coord[((b * ta + t) * f + k) * 2 + 1] = config_.input_scale * phi;
      }
  RVar s = ops::reshape(spectrograms, {n, 1, ta, f, 1});
  RVar x = ops::mul(ops::concat_last<float>({s, s}), RVar::constant(std::move(coord)));
  for (const auto& block : blocks_) x = ops::max_pool3d(ops::relu(block(x)), {1, 2, 2});
  return ops::reshape(x, {n, x.dim(2), x.dim(3), x.dim(4)});
}

Index nearest_centre_index(Index t, Index target_len, Index source_len) {
  const double r = static_cast<double>(source_len) / static_cast<double>(target_len);
  const double x = (static_cast<double>(t) + 0.5) * r - 0.5;
  const auto idx = static_cast<Index>(std::ceil(x - 0.5));
  return std::clamp<Index>(idx, 0, source_len - 1);
}

template <typename T>
Var<T> fuse(const Var<T>& visual, const Var<T>& audio) {
  if (visual.value().rank() != 5) {
    throw std::invalid_argument("fuse: visual features must be [N,T,W,H,C], got " + shape_string(visual.shape()));
  }
  if (audio.value().rank() != 4 || audio.dim(0) != visual.dim(0)) {
    throw std::invalid_argument("fuse: audio features must be [N,T_a,F,C] with the visual batch, got " +
                                shape_string(audio.shape()));
  }
  const Index n = visual.dim(0), t_len = visual.dim(1), w = visual.dim(2), h = visual.dim(3), cv = visual.dim(4);
  const Index ta = audio.dim(1), f = audio.dim(2), ca = audio.dim(3);
  std::vector<Index> src(static_cast<std::size_t>(t_len));
  for (Index t = 0; t < t_len; ++t) src[static_cast<std::size_t>(t)] = nearest_centre_index(t, t_len, ta);

  // Frequency-pooled audio [N, T_a, Ca].
  Tensor<T> pooled({n, ta, ca});
  const T* ap = audio.value().data();
  for (Index b = 0; b < n; ++b)
    for (Index t = 0; t < ta; ++t)
      for (Index k = 0; k < f; ++k)
        for (Index c = 0; c < ca; ++c) pooled[(b * ta + t) * ca + c] += ap[((b * ta + t) * f + k) * ca + c];
  for (Index i = 0; i < pooled.size(); ++i) pooled[i] /= static_cast<T>(f);

  const Index co = cv + ca;
  Tensor<T> out({n, t_len, w, h, co});
  const T* vp = visual.value().data();
  for (Index b = 0; b < n; ++b)
    for (Index t = 0; t < t_len; ++t) {
      const T* arow = pooled.data() + (b * ta + src[static_cast<std::size_t>(t)]) * ca;
      for (Index p = 0; p < w * h; ++p) {
        const Index pos = (b * t_len + t) * w * h + p;
        std::copy_n(vp + pos * cv, cv, out.data() + pos * co);
        std::copy_n(arow, ca, out.data() + pos * co + cv);
      }
    }
  return make_result<T>(std::move(out), {visual, audio}, [=](Node<T>& node) {
    auto& pv = *node.parents[0];
    auto& pa = *node.parents[1];
    const T* gy = node.grad.data();
    if (pv.requires_grad) {
      T* gv = pv.grad_buffer().data();
      for (Index pos = 0; pos < n * t_len * w * h; ++pos)
        for (Index c = 0; c < cv; ++c) gv[pos * cv + c] += gy[pos * co + c];
    }
    if (pa.requires_grad) {
      Tensor<T> gpool({n, ta, ca});
      for (Index b = 0; b < n; ++b)
        for (Index t = 0; t < t_len; ++t) {
          T* grow = gpool.data() + (b * ta + src[static_cast<std::size_t>(t)]) * ca;
          for (Index p = 0; p < w * h; ++p) {
            const Index pos = (b * t_len + t) * w * h + p;
            for (Index c = 0; c < ca; ++c) grow[c] += gy[pos * co + cv + c];
          }
        }
      T* ga = pa.grad_buffer().data();
      const T inv = T{1} / static_cast<T>(f);
      for (Index b = 0; b < n; ++b)
        for (Index t = 0; t < ta; ++t)
          for (Index k = 0; k < f; ++k)
            for (Index c = 0; c < ca; ++c) ga[((b * ta + t) * f + k) * ca + c] += gpool[(b * ta + t) * ca + c] * inv;
    }
  });
}

template Var<float> fuse(const Var<float>&, const Var<float>&);
template Var<double> fuse(const Var<double>&, const Var<double>&);

Tensor<float> slot_embeddings(const Tensor<float>& outputs, int n) {
  if (outputs.rank() != 5 || outputs.dim(4) != Index{n} * 3) {
    throw std::invalid_argument("slot_embeddings: expected [N,T,W,H," + std::to_string(3 * n) + "] outputs, got " +
                                shape_string(outputs.shape()));
  }
  const Index batch = outputs.dim(0);
  const Index pixels = outputs.size() / (batch * n * 3);
  Tensor<float> emb({batch, n, 6});
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < 3; ++c) {
        double acc = 0;
        float hi = -std::numeric_limits<float>::infinity();
        for (Index p = 0; p < pixels; ++p) {
          const float v = outputs[((b * pixels + p) * n + i) * 3 + c];
          acc += v;
          hi = std::max(hi, v);
        }
        emb[(b * n + i) * 6 + c] = static_cast<float>(acc / static_cast<double>(pixels));
        emb[(b * n + i) * 6 + 3 + c] = hi;
      }
  return emb;
}

ControlHead::ControlHead(const ControlHeadConfig& config, int pooled_channels, ParameterStore& store,
                         std::mt19937_64& rng)
    : config_(config), pooled_channels_(pooled_channels) {
  hidden_ = LinearLayer::create(store, "control/hidden", pooled_channels + config_.embedding, config_.hidden, rng);
  out_ = LinearLayer::create(store, "control/out", config_.hidden, 1, rng);
}

RVar ControlHead::operator()(const RVar& pooled, const RVar& embeddings) const {
  if (pooled.value().rank() != 2 || pooled.dim(1) != pooled_channels_) {
    throw std::invalid_argument("control head: pooled features must be [N," + std::to_string(pooled_channels_) +
                                "], got " + shape_string(pooled.shape()));
  }
  if (embeddings.value().rank() != 3 || embeddings.dim(0) != pooled.dim(0) ||
      embeddings.dim(2) != config_.embedding) {
    throw std::invalid_argument("control head: embeddings must be [N,n," + std::to_string(config_.embedding) +
                                "], got " + shape_string(embeddings.shape()));
  }
  const Index n = embeddings.dim(1);
  if (n < 2) throw std::invalid_argument("control head: need at least 2 slots");
  const Index e = config_.embedding;
  RVar flat = ops::reshape(embeddings, {embeddings.dim(0), n * e});
  std::vector<RVar> scores;
  for (Index i = 0; i < n; ++i) {
    RVar in = ops::concat_last<float>({pooled, ops::slice_last(flat, i * e, e)});
    scores.push_back(out_(ops::relu(hidden_(in))));
  }
  return ops::concat_last(scores);
}

int select_slot(std::span<const float> scores) {
  if (scores.empty()) throw std::invalid_argument("select_slot: no scores");
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace c3
