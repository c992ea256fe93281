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

#include "c3/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace c3 {
namespace {

struct Dims {
  Index t, w, h, c;
  Index frame() const { return w * h * c; }
  Index size() const { return t * frame(); }
};

int sign_of(double x) { return (x > 0) - (x < 0); }

// Pixel and gradient parts of the distance for one clip.
template <typename T>
std::pair<double, double> distance_parts(const T* u, const T* v, const Dims& d) {
  double pix = 0, grad = 0;
  for (Index t = 0; t < d.t; ++t)
    for (Index x = 0; x < d.w; ++x)
      for (Index y = 0; y < d.h; ++y)
        for (Index c = 0; c < d.c; ++c) {
          const Index i = ((t * d.w + x) * d.h + y) * d.c + c;
          const double e = double{u[i]} - double{v[i]};
          pix += std::abs(e);
          if (x + 1 < d.w) {
            const Index j = i + d.h * d.c;
            grad += std::abs((double{u[j]} - double{v[j]}) - e);
          }
          if (y + 1 < d.h) {
            const Index j = i + d.c;
            grad += std::abs((double{u[j]} - double{v[j]}) - e);
          }
        }
  const double norm = 2.0 * static_cast<double>(d.size());
  return {pix / norm, grad / norm};
}

// d distance / d u scaled by `scale`, accumulated into gu (and -gu into gv).
template <typename T>
void distance_backward(const T* u, const T* v, const Dims& d, T scale, T* gu, T* gv) {
  const T k = scale / static_cast<T>(2 * d.size());
  auto add = [&](Index i, T g) {
    if (gu) gu[i] += g;
    if (gv) gv[i] -= g;
  };
  for (Index t = 0; t < d.t; ++t)
    for (Index x = 0; x < d.w; ++x)
      for (Index y = 0; y < d.h; ++y)
        for (Index c = 0; c < d.c; ++c) {
          const Index i = ((t * d.w + x) * d.h + y) * d.c + c;
          const T e = u[i] - v[i];
          add(i, k * static_cast<T>(sign_of(static_cast<double>(e))));
          if (x + 1 < d.w) {
            const Index j = i + d.h * d.c;
            const T s = k * static_cast<T>(sign_of(static_cast<double>((u[j] - v[j]) - e)));
            add(j, s);
            add(i, -s);
          }
          if (y + 1 < d.h) {
            const Index j = i + d.c;
            const T s = k * static_cast<T>(sign_of(static_cast<double>((u[j] - v[j]) - e)));
            add(j, s);
            add(i, -s);
          }
        }
}

LossValue make_loss(std::map<std::string, double> parts) {
  LossValue out;
  for (const auto& [k, v] : parts) out.value += v;
  out.breakdown = std::move(parts);
  return out;
}

void check_slots(const Video& v1, const OutputSet& outputs) {
  const Shape& s = outputs.outputs.shape();
  const Shape& f = v1.frames.shape();
  if (s.size() != 5 || s[4] != 3 || f.size() != 4 || s[0] != f[0] || s[1] != f[1] || s[2] != f[2]) {
    throw std::invalid_argument("outputs " + shape_string(s) + " do not match target video " + shape_string(f));
  }
}

}  // namespace

LossValue recon_loss(const Tensor<float>& u, const Tensor<float>& v) {
  if (u.shape() != v.shape() || u.rank() != 4) {
    throw std::invalid_argument("recon_loss: shapes " + shape_string(u.shape()) + " and " + shape_string(v.shape()) +
                                " differ or are not [T,W,H,C]");
  }
  const Dims d{u.dim(0), u.dim(1), u.dim(2), u.dim(3)};
  auto [pix, grad] = distance_parts(u.data(), v.data(), d);
  return make_loss({{"pixel", pix}, {"gradient", grad}});
}

LossValue recon_loss(const Video& u, const Video& v) { return recon_loss(u.frames, v.frames); }

PilResult pil_from_matrix(const std::array<std::vector<double>, 2>& losses) {
  const std::size_t n = losses[0].size();
  if (losses[1].size() != n) throw std::invalid_argument("pil_loss: loss rows differ in length");
  if (n < 2) throw std::invalid_argument("pil_loss: need at least 2 output slots, got " + std::to_string(n));
  PilResult best;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double value = losses[0][i] + losses[1][j];
      if (value < best_value) {
        best_value = value;
        best.assignment = {static_cast<int>(i), static_cast<int>(j)};
        best.loss = make_loss({{"first", losses[0][i]}, {"second", losses[1][j]}});
      }
    }
  return best;
}

std::vector<double> slot_losses(const Video& v1, const OutputSet& outputs) {
  check_slots(v1, outputs);
  std::vector<double> out;
  for (int i = 0; i < outputs.n(); ++i) out.push_back(recon_loss(v1.frames, outputs.slot(i)).value);
  return out;
}

PilResult pil_loss(const Video& v1, const Video& v2, const OutputSet& outputs) {
  if (outputs.outputs.rank() == 5 && outputs.n() < 2) {
    throw std::invalid_argument("pil_loss: need at least 2 output slots, got " + std::to_string(outputs.n()));
  }
  return pil_from_matrix({slot_losses(v1, outputs), slot_losses(v2, outputs)});
}

LossValue det_loss(const Video& v1, const Video& v2, const OutputSet& outputs) {
  if (outputs.outputs.rank() != 5 || outputs.n() != 2) {
    throw std::invalid_argument("det_loss: requires exactly 2 output slots, got " +
                                (outputs.outputs.rank() == 5 ? std::to_string(outputs.n()) : std::string("none")));
  }
  check_slots(v1, outputs);
  check_slots(v2, outputs);
  return make_loss({{"first", recon_loss(v1.frames, outputs.slot(0)).value},
                    {"second", recon_loss(v2.frames, outputs.slot(1)).value}});
}

LossValue reg_loss(std::span<const float> scores, std::span<const double> slot_losses) {
  if (scores.size() != slot_losses.size()) {
    throw std::invalid_argument("reg_loss: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(slot_losses.size()) + " slots");
  }
  std::map<std::string, double> parts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    parts["slot" + std::to_string(i)] = std::abs(double{scores[i]} - slot_losses[i]);
  }
  return make_loss(std::move(parts));
}

LossValue reg_loss(const Video& v1, std::span<const float> scores, const OutputSet& outputs) {
  const auto losses = slot_losses(v1, outputs);
  return reg_loss(scores, losses);
}

ControlJudgement judge_control(std::span<const double> losses, int chosen) {
  if (losses.empty()) throw std::invalid_argument("judge_control: no slots");
  if (chosen < 0 || static_cast<std::size_t>(chosen) >= losses.size()) {
    throw std::invalid_argument("judge_control: slot " + std::to_string(chosen) + " out of range");
  }
  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  ControlJudgement j;
  j.chosen = chosen;
  j.losses.assign(losses.begin(), losses.end());
  j.threshold = 0.2 * (*hi - *lo);
  j.correct = losses[static_cast<std::size_t>(chosen)] <= *lo + j.threshold;
  return j;
}

ControlJudgement control_accuracy(const Video& v1, const OutputSet& outputs, int chosen) {
  const auto losses = slot_losses(v1, outputs);
  return judge_control(losses, chosen);
}

double score_transparent(std::array<Label, 2> predicted, std::array<Label, 2> truth) {
  int hits = 0;
  std::array<bool, 2> used{false, false};
  for (Label p : predicted)
    for (std::size_t k = 0; k < 2; ++k)
      if (!used[k] && truth[k] == p) {
        used[k] = true;
        ++hits;
        break;
      }
  return hits / 2.0;
}

double score_occlusion(Label predicted, Label truth) { return predicted == truth ? 1.0 : 0.0; }

double score_transparent(const ActionClassifier& classifier, const Video& first, const Video& second,
                         std::array<Label, 2> truth) {
  return score_transparent({classifier.classify(first), classifier.classify(second)}, truth);
}

double score_occlusion(const ActionClassifier& classifier, const Video& output, Label truth) {
  return score_occlusion(classifier.classify(output), truth);
}

namespace batched {

template <typename T>
Var<T> recon_loss(const Var<T>& u, const Var<T>& v) {
  if (u.shape() != v.shape() || u.value().rank() != 5) {
    throw std::invalid_argument("recon_loss: shapes " + shape_string(u.shape()) + " and " + shape_string(v.shape()) +
                                " differ or are not [N,T,W,H,C]");
  }
  const Index n = u.dim(0);
  const Dims d{u.dim(1), u.dim(2), u.dim(3), u.dim(4)};
  Tensor<T> out(Shape{n});
  for (Index b = 0; b < n; ++b) {
    auto [pix, grad] = distance_parts(u.value().data() + b * d.size(), v.value().data() + b * d.size(), d);
    out[b] = static_cast<T>(pix + grad);
  }
  return make_result<T>(std::move(out), {u, v}, [n, d](Node<T>& node) {
    auto& pu = *node.parents[0];
    auto& pv = *node.parents[1];
    T* gu = pu.requires_grad ? pu.grad_buffer().data() : nullptr;
    T* gv = pv.requires_grad ? pv.grad_buffer().data() : nullptr;
    for (Index b = 0; b < n; ++b) {
      const Index off = b * d.size();
      distance_backward(pu.value.data() + off, pv.value.data() + off, d, node.grad[b], gu ? gu + off : nullptr,
                        gv ? gv + off : nullptr);
    }
  });
}

template <typename T>
Var<T> slot(const Var<T>& outputs, int i) {
  return ops::slice_last(outputs, Index{i} * 3, 3);
}

template Var<float> recon_loss(const Var<float>&, const Var<float>&);
template Var<double> recon_loss(const Var<double>&, const Var<double>&);
template Var<float> slot(const Var<float>&, int);
template Var<double> slot(const Var<double>&, int);

namespace {
void check_batch(const RVar& v, const RVar& outputs, int n) {
  if (outputs.value().rank() != 5 || outputs.dim(4) != Index{n} * 3) {
    throw std::invalid_argument("outputs " + shape_string(outputs.shape()) + " do not carry " + std::to_string(n) +
                                " RGB slots");
  }
  for (int a = 0; a < 4; ++a)
    if (v.dim(a) != outputs.dim(a)) {
      throw std::invalid_argument("outputs " + shape_string(outputs.shape()) + " do not match targets " +
                                  shape_string(v.shape()));
    }
}
}  // namespace

PilBatch pil_loss(const RVar& v1, const RVar& v2, const RVar& outputs, int n) {
  if (n < 2) throw std::invalid_argument("pil_loss: need at least 2 output slots, got " + std::to_string(n));
  check_batch(v1, outputs, n);
  check_batch(v2, outputs, n);
  const Index batch = v1.dim(0);
  std::vector<RVar> first, second;
  for (int i = 0; i < n; ++i) {
    RVar o = slot(outputs, i);
    first.push_back(recon_loss(v1, o));
    second.push_back(recon_loss(v2, o));
  }
  PilBatch out;
  std::vector<RVar> candidates;
  std::vector<Assignment> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        pairs.push_back({i, j});
        candidates.push_back(ops::add(first[static_cast<std::size_t>(i)], second[static_cast<std::size_t>(j)]));
      }
  std::vector<int> pick(static_cast<std::size_t>(batch), 0);
  for (Index b = 0; b < batch; ++b) {
    float best = std::numeric_limits<float>::infinity();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const float value = candidates[k].value()[b];
      if (value < best) {
        best = value;
        pick[static_cast<std::size_t>(b)] = static_cast<int>(k);
      }
    }
    out.assignments.push_back(pairs[static_cast<std::size_t>(pick[static_cast<std::size_t>(b)])]);
    out.per_sample.push_back(best);
  }
  out.loss = ops::mean(ops::select_per_sample(candidates, pick));
  return out;
}

RVar det_loss(const RVar& v1, const RVar& v2, const RVar& outputs, int n) {
  if (n != 2) throw std::invalid_argument("det_loss: requires exactly 2 output slots, got " + std::to_string(n));
  check_batch(v1, outputs, n);
  check_batch(v2, outputs, n);
  return ops::mean(ops::add(recon_loss(v1, slot(outputs, 0)), recon_loss(v2, slot(outputs, 1))));
}

RVar reg_loss(const RVar& v1, const RVar& scores, const RVar& outputs, int n, Tensor<float>* targets) {
  check_batch(v1, outputs, n);
  const Index batch = v1.dim(0);
  if (scores.value().rank() != 2 || scores.dim(0) != batch || scores.dim(1) != n) {
    throw std::invalid_argument("reg_loss: scores " + shape_string(scores.shape()) + " for " + std::to_string(n) +
                                " slots");
  }
  RVar barrier = stop_gradient(outputs);
  Tensor<float> t({batch, Index{n}});
  for (int i = 0; i < n; ++i) {
    RVar l = recon_loss(v1, slot(barrier, i));
    for (Index b = 0; b < batch; ++b) t[b * n + i] = l.value()[b];
  }
  if (targets) *targets = t;
  RVar err = ops::abs(ops::sub(scores, RVar::constant(std::move(t))));
  return ops::scale(ops::sum(err), 1.0f / static_cast<float>(batch));
}

}  // namespace batched
}  // namespace c3
