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

#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "c3/ops.hpp"

namespace c3 {

using RVar = Var<float>;

// Named trainable tensors, iterated in registration order.
class ParameterStore {
 public:
  RVar add(const std::string& name, Tensor<float> init);
  RVar get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  Index total_size() const;
  void zero_grad();

  // Checkpoint layout: `dir/params.manifest` lists `name shape...` per line and
  // every tensor is stored in the io tensor format under `dir/params/`.
  void save(const std::filesystem::path& dir) const;
  // Throws std::runtime_error naming every missing, unexpected or mis-shaped
  // parameter.
  void load(const std::filesystem::path& dir);

 private:
  std::map<std::string, RVar> params_;
  std::vector<std::string> order_;
};

Tensor<float> he_normal(Shape shape, Index fan_in, std::mt19937_64& rng);

struct Conv3dLayer {
  RVar weight;  // [kt,kw,kh,Ci,Co]
  RVar bias;    // [Co]
  ops::ConvSpec spec;

  static Conv3dLayer create(ParameterStore& store, const std::string& name, ops::Triple kernel, int in,
                            int out, ops::Triple stride, std::mt19937_64& rng);
  RVar operator()(const RVar& x) const { return ops::conv3d(x, weight, bias, spec); }
};

struct UpConv3dLayer {
  RVar weight;  // [Ci,kt,kw,kh,Co]
  RVar bias;
  ops::Triple kernel{};

  static UpConv3dLayer create(ParameterStore& store, const std::string& name, ops::Triple kernel,
                              int in, int out, std::mt19937_64& rng);
  RVar operator()(const RVar& x) const { return ops::upconv3d(x, weight, bias, kernel); }
};

struct LinearLayer {
  RVar weight;  // [Ci,Co]
  RVar bias;

  static LinearLayer create(ParameterStore& store, const std::string& name, int in, int out,
                            std::mt19937_64& rng);
  RVar operator()(const RVar& x) const { return ops::linear(x, weight, bias); }
};

// lr(step) = initial * factor^(number of decay steps <= step).
struct LearningRateSchedule {
  double initial = 0.05;
  std::vector<long> decay_steps;
  double factor = 0.1;

  double at(long step) const;
};

// Heavy-ball SGD: v <- momentum*v + g; p <- p - lr*v.
class MomentumSgd {
 public:
  explicit MomentumSgd(double momentum = 0.9) : momentum_(momentum) {}
  void step(ParameterStore& store, double lr);
  double momentum() const { return momentum_; }
  // Parameters whose name starts with `prefix` step at lr * scale.
  void set_lr_scale(const std::string& prefix, double scale);

 private:
  double momentum_;
  std::vector<std::pair<std::string, double>> scales_;
  std::map<std::string, Tensor<float>> velocity_;
};

}  // namespace c3
