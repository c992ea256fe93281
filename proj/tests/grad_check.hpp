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

// Central finite-difference checks for double-precision autograd graphs.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "c3/autograd.hpp"
#include "c3/ops.hpp"

namespace c3::testing {

using DVar = Var<double>;
using Graph = std::function<DVar(const std::vector<DVar>&)>;

struct GradReport {
  double max_rel_error = 0;
  std::string worst;  // "input i, entry k"
};

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Reduces `out` to a scalar with fixed random weights so every output entry
// contributes a distinct direction.
inline DVar weighted_sum(const DVar& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(out, DVar::constant(random_tensor(out.shape(), rng, 0.5, 1.5))));
}

// |analytic - numeric| / max(|analytic|, |numeric|, floor) over every input
// entry, with central differences of step h. The floor sits above the
// round-off of a difference quotient, so entries that are exactly zero
// analytically do not read as large relative errors.
inline GradReport check_gradients(const Graph& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5,
                                  double floor = 1e-6) {
  std::vector<DVar> vars;
  for (const auto& t : inputs) vars.push_back(DVar::parameter(t));
  DVar y = f(vars);
  backward(y);
  GradReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = vars[i].grad();
    for (Index k = 0; k < inputs[i].size(); ++k) {
      auto eval = [&](double delta) {
        std::vector<DVar> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor<double> t = inputs[j];
          if (j == i) t[k] += delta;
          probe.push_back(DVar::constant(std::move(t)));
        }
        return f(probe).value()[0];
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
      const double rel = std::abs(analytic[k] - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = "input " + std::to_string(i) + ", entry " + std::to_string(k) + " (analytic " +
                       std::to_string(analytic[k]) + ", numeric " + std::to_string(numeric) + ")";
      }
    }
  }
  return report;
}

}  // namespace c3::testing
