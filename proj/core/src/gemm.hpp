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

#include <Eigen/Core>

#include "c3/tensor.hpp"

namespace c3::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// C (+)= op(A) * op(B) on row-major buffers.
template <typename T>
void gemm(const T* a, Index a_rows, Index a_cols, bool trans_a, const T* b, Index b_rows,
          Index b_cols, bool trans_b, T* c, bool accumulate) {
  ConstMatMap<T> A(a, a_rows, a_cols);
  ConstMatMap<T> B(b, b_rows, b_cols);
  const Index m = trans_a ? a_cols : a_rows;
  const Index n = trans_b ? b_rows : b_cols;
  MatMap<T> C(c, m, n);
  if (!trans_a && !trans_b) {
    if (accumulate) C.noalias() += A * B; else C.noalias() = A * B;
  } else if (trans_a && !trans_b) {
    if (accumulate) C.noalias() += A.transpose() * B; else C.noalias() = A.transpose() * B;
  } else if (!trans_a && trans_b) {
    if (accumulate) C.noalias() += A * B.transpose(); else C.noalias() = A * B.transpose();
  } else {
    if (accumulate) C.noalias() += A.transpose() * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
}

}  // namespace c3::detail
