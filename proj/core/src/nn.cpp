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

#include "c3/nn.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "c3/io.hpp"

namespace c3 {
namespace fs = std::filesystem;

RVar ParameterStore::add(const std::string& name, Tensor<float> init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  RVar v = RVar::parameter(std::move(init));
  params_.emplace(name, v);
  order_.push_back(name);
  return v;
}

RVar ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

Index ParameterStore::total_size() const {
  Index n = 0;
  for (const auto& [name, v] : params_) n += v.value().size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : params_) {
    RVar copy = v;
    copy.zero_grad();
  }
}

namespace {
std::string file_key(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (c == '/') c = '.';
  return s;
}
}  // namespace

void ParameterStore::save(const fs::path& dir) const {
  fs::create_directories(dir / "params");
  std::ofstream manifest(dir / "params.manifest");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "params.manifest").string());
  for (const auto& name : order_) {
    const auto& t = params_.at(name).value();
    manifest << name;
    for (Index d : t.shape()) manifest << ' ' << d;
    manifest << '\n';
    io::write_tensor(dir / "params" / file_key(name), t, "parameter", {{"name", name}});
  }
}

void ParameterStore::load(const fs::path& dir) {
  std::ifstream manifest(dir / "params.manifest");
  if (!manifest) throw std::runtime_error("missing " + (dir / "params.manifest").string());
  std::map<std::string, Shape> stored;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name;
    is >> name;
    Shape s;
    Index d;
    while (is >> d) s.push_back(d);
    stored[name] = s;
  }
  std::vector<std::string> problems;
  for (const auto& name : order_) {
    auto it = stored.find(name);
    const Shape& want = params_.at(name).shape();
    if (it == stored.end()) {
      problems.push_back("missing parameter " + name);
    } else if (it->second != want) {
      problems.push_back("parameter " + name + " has shape " + shape_string(it->second) +
                         ", model expects " + shape_string(want));
    }
  }
  for (const auto& [name, s] : stored) {
    if (!params_.count(name)) problems.push_back("unexpected parameter " + name);
  }
  if (!problems.empty()) {
    std::string msg = "incompatible checkpoint " + dir.string() + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  for (const auto& name : order_) {
    io::TensorFile f = io::read_tensor(dir / "params" / file_key(name));
    if (f.tensor.shape() != params_.at(name).shape()) {
      throw std::runtime_error("parameter file for " + name + " disagrees with manifest");
    }
    params_.at(name).mutable_value() = std::move(f.tensor);
  }
}

Tensor<float> he_normal(Shape shape, Index fan_in, std::mt19937_64& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(std::max<Index>(fan_in, 1))));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(dist(rng));
  return t;
}

Conv3dLayer Conv3dLayer::create(ParameterStore& store, const std::string& name, ops::Triple kernel,
                                int in, int out, ops::Triple stride, std::mt19937_64& rng) {
  Conv3dLayer l;
  const Index fan_in = Index{kernel[0]} * kernel[1] * kernel[2] * in;
  l.weight = store.add(name + "/w", he_normal({kernel[0], kernel[1], kernel[2], in, out}, fan_in, rng));
  l.bias = store.add(name + "/b", Tensor<float>(Shape{out}));
  l.spec.stride = stride;
  l.spec.pad = {kernel[0] / 2, kernel[1] / 2, kernel[2] / 2};
  return l;
}

UpConv3dLayer UpConv3dLayer::create(ParameterStore& store, const std::string& name, ops::Triple kernel,
                                    int in, int out, std::mt19937_64& rng) {
  UpConv3dLayer l;
  l.weight = store.add(name + "/w", he_normal({in, kernel[0], kernel[1], kernel[2], out}, in, rng));
  l.bias = store.add(name + "/b", Tensor<float>(Shape{out}));
  l.kernel = kernel;
  return l;
}

LinearLayer LinearLayer::create(ParameterStore& store, const std::string& name, int in, int out,
                                std::mt19937_64& rng) {
  LinearLayer l;
  l.weight = store.add(name + "/w", he_normal({in, out}, in, rng));
  l.bias = store.add(name + "/b", Tensor<float>(Shape{out}));
  return l;
}

double LearningRateSchedule::at(long step) const {
  double lr = initial;
  for (long s : decay_steps)
    if (step >= s) lr *= factor;
  return lr;
}

void MomentumSgd::set_lr_scale(const std::string& prefix, double scale) {
  if (!(scale > 0)) throw std::invalid_argument("optimizer: lr scale for '" + prefix + "' must be positive");
  scales_.emplace_back(prefix, scale);
}

void MomentumSgd::step(ParameterStore& store, double lr) {
  const auto mu = static_cast<float>(momentum_);
  for (const auto& name : store.names()) {
    RVar p = store.get(name);
    const Node<float>& node = *p.node();
    if (!node.has_grad()) continue;
    double scaled = lr;
    for (const auto& [prefix, scale] : scales_)
      if (name.starts_with(prefix)) scaled *= scale;
    const auto rate = static_cast<float>(scaled);
    auto [it, fresh] = velocity_.try_emplace(name, p.shape());
    Tensor<float>& v = it->second;
    const float* g = node.grad.data();
    float* w = p.mutable_value().data();
    for (Index i = 0; i < v.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      w[i] -= rate * v[i];
    }
  }
}

}  // namespace c3
