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

// Reconstruction losses, slot-assignment objectives and evaluation metrics.
//
// The video distance is
//
//   l(U, V) = 1/(2T) * sum_t [ mean|U_t - V_t| + mean(|dx(U_t - V_t)| + |dy(U_t - V_t)|) ]
//
// with means over pixels and channels and forward differences that are zero
// on the last column (dx) and last row (dy).

#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "c3/decoder.hpp"
#include "c3/domain.hpp"

namespace c3 {

struct LossValue {
  double value = 0;
  std::map<std::string, double> breakdown;
};

LossValue recon_loss(const Video& u, const Video& v);
LossValue recon_loss(const Tensor<float>& u, const Tensor<float>& v);  // [T,W,H,C]

struct Assignment {
  int first = 0;   // slot matched to the first target
  int second = 1;  // slot matched to the second target
  bool operator==(const Assignment&) const = default;
};

struct PilResult {
  LossValue loss;
  Assignment assignment;
};

// losses[k][i] = l(target k, slot i). Minimum of losses[0][i] + losses[1][j]
// over ordered pairs i != j; the first minimiser in (i, j) scan order wins.
PilResult pil_from_matrix(const std::array<std::vector<double>, 2>& losses);

PilResult pil_loss(const Video& v1, const Video& v2, const OutputSet& outputs);
LossValue det_loss(const Video& v1, const Video& v2, const OutputSet& outputs);
LossValue reg_loss(const Video& v1, std::span<const float> scores, const OutputSet& outputs);
LossValue reg_loss(std::span<const float> scores, std::span<const double> slot_losses);

// l(v1, O_i) for every slot.
std::vector<double> slot_losses(const Video& v1, const OutputSet& outputs);

struct ControlJudgement {
  int chosen = 0;
  std::vector<double> losses;
  double threshold = 0;
  bool correct = false;
};

// correct iff losses[chosen] <= min + 0.2*(max - min).
ControlJudgement judge_control(std::span<const double> losses, int chosen);
ControlJudgement control_accuracy(const Video& v1, const OutputSet& outputs, int chosen);

using Label = int;

// Order-free: 1 for both labels right, 0.5 for one, 0 for none. Repeated
// labels count as a multiset.
double score_transparent(std::array<Label, 2> predicted, std::array<Label, 2> truth);
double score_occlusion(Label predicted, Label truth);

// Pluggable video classifier used by the scoring helpers.
class ActionClassifier {
 public:
  virtual ~ActionClassifier() = default;
  virtual Label classify(const Video& v) const = 0;
};

double score_transparent(const ActionClassifier& classifier, const Video& first, const Video& second,
                         std::array<Label, 2> truth);
double score_occlusion(const ActionClassifier& classifier, const Video& output, Label truth);

// Batched, differentiable forms on [N,T,W,H,C] tensors.
namespace batched {

// Per-sample distance -> [N].
template <typename T>
Var<T> recon_loss(const Var<T>& u, const Var<T>& v);

// Slot i of outputs [N,T,W,H,n*3] as [N,T,W,H,3].
template <typename T>
Var<T> slot(const Var<T>& outputs, int i);

struct PilBatch {
  RVar loss;  // [1], batch mean
  std::vector<Assignment> assignments;
  std::vector<double> per_sample;
};

PilBatch pil_loss(const RVar& v1, const RVar& v2, const RVar& outputs, int n);
RVar det_loss(const RVar& v1, const RVar& v2, const RVar& outputs, int n);  // [1]

// Batch mean of sum_i |s_i - l(v1, sg(O_i))|. `targets` receives the
// detached per-slot losses [N, n].
RVar reg_loss(const RVar& v1, const RVar& scores, const RVar& outputs, int n, Tensor<float>* targets = nullptr);

}  // namespace batched
}  // namespace c3
