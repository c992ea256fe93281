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

// Differentiable tensor ops. All ops are instantiated for float (training) and
// double (gradient verification). Spatio-temporal tensors are channels-last:
// [N, T, W, H, C].

#pragma once

#include <array>
#include <vector>

#include "c3/autograd.hpp"

namespace c3::ops {

using Triple = std::array<int, 3>;

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> sum(const Var<T>& a);   // -> shape [1]
template <typename T> Var<T> mean(const Var<T>& a);  // -> shape [1]

// Softmax over the last axis.
template <typename T> Var<T> softmax_last(const Var<T>& a);

template <typename T> Var<T> concat_last(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_last(const Var<T>& a, Index begin, Index count);
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);

// out[b] = candidates[index[b]][b] for rank-1 candidates of length N.
template <typename T>
Var<T> select_per_sample(const std::vector<Var<T>>& candidates, const std::vector<int>& index);

struct ConvSpec {
  Triple stride{1, 1, 1};
  Triple pad{0, 0, 0};
};

// x: [N,T,W,H,Ci], w: [kt,kw,kh,Ci,Co], b: [Co] (may be undefined).
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvSpec& spec);

// Transposed convolution whose kernel equals its stride (non-overlapping
// blocks). x: [N,T,W,H,Ci], w: [Ci,kt,kw,kh,Co], b: [Co].
// Output: [N, T*kt, W*kw, H*kh, Co].
template <typename T>
Var<T> upconv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Triple kernel);

// Non-overlapping max pooling; trailing remainders are dropped.
template <typename T> Var<T> max_pool3d(const Var<T>& x, Triple window);

// Mean over every axis except the first and the last: [N, ..., C] -> [N, C].
template <typename T> Var<T> global_avg_pool(const Var<T>& x);

// x: [..., Ci], w: [Ci, Co], b: [Co].
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// Trilinear resize with half-pixel centres on [N,T,W,H,C].
template <typename T> Var<T> resize_trilinear(const Var<T>& x, Triple size);

}  // namespace c3::ops
