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

#include "c3/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "gemm.hpp"

namespace c3 {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace ops {
namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const Var<T>& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_string(a.shape()));
  }
}

// Elementwise unary op helper: f gives the value, df(x, y) the local derivative.
template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& a, F f, DF df) {
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  T* y = out.data();
  for (Index i = 0; i < out.size(); ++i) y[i] = f(x[i]);
  return make_result<T>(std::move(out), {a}, [df](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    const T* x = p.value.data();
    const T* y = n.value.data();
    const T* gy = n.grad.data();
    for (Index i = 0; i < n.value.size(); ++i) g[i] += gy[i] * df(x[i], y[i]);
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const T* y = b.value().data();
  for (Index i = 0; i < out.size(); ++i) out[i] += y[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (auto& p : n.parents) {
      if (!p->requires_grad) continue;
      T* g = p->grad_buffer().data();
      for (Index i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const T* y = b.value().data();
  for (Index i = 0; i < out.size(); ++i) out[i] -= y[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const T sign[2] = {T{1}, T{-1}};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = *n.parents[k];
      if (!p.requires_grad) continue;
      T* g = p.grad_buffer().data();
      for (Index i = 0; i < n.grad.size(); ++i) g[i] += sign[k] * n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const T* y = b.value().data();
  for (Index i = 0; i < out.size(); ++i) out[i] *= y[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      T* g = pa.grad_buffer().data();
      for (Index i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      T* g = pb.grad_buffer().data();
      for (Index i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return unary<T>(a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary<T>(
      a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary<T>(
      a, [slope](T x) { return x > T{0} ? x : slope * x; },
      [slope](T x, T) { return x > T{0} ? T{1} : slope; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary<T>(
      a, [](T x) { return T{1} / (T{1} + std::exp(-x)); },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary<T>(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  long double acc = 0;
  for (T v : a.value().values()) acc += v;
  Tensor<T> out(Shape{1}, static_cast<T>(acc));
  return make_result<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    for (Index i = 0; i < p.value.size(); ++i) g[i] += n.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const Index count = a.value().size();
  if (count == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), T{1} / static_cast<T>(count));
}

template <typename T>
Var<T> softmax_last(const Var<T>& a) {
  const Index c = a.dim(-1);
  const Index rows = a.value().size() / std::max<Index>(c, 1);
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  T* y = out.data();
  for (Index r = 0; r < rows; ++r) {
    const T* xr = x + r * c;
    T* yr = y + r * c;
    T mx = *std::max_element(xr, xr + c);
    T z = 0;
    for (Index k = 0; k < c; ++k) z += (yr[k] = std::exp(xr[k] - mx));
    for (Index k = 0; k < c; ++k) yr[k] /= z;
  }
  return make_result<T>(std::move(out), {a}, [c, rows](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    const T* y = n.value.data();
    const T* gy = n.grad.data();
    for (Index r = 0; r < rows; ++r) {
      T dot = 0;
      for (Index k = 0; k < c; ++k) dot += gy[r * c + k] * y[r * c + k];
      for (Index k = 0; k < c; ++k) g[r * c + k] += y[r * c + k] * (gy[r * c + k] - dot);
    }
  });
}

template <typename T>
Var<T> concat_last(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<Index> widths;
  Index total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    widths.push_back(s.back());
    s.pop_back();
    if (s != lead) throw std::invalid_argument("concat_last: leading shape mismatch");
    total += widths.back();
  }
  const Index rows = numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor<T> out(out_shape);
  Index col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().data();
    const Index w = widths[k];
    for (Index r = 0; r < rows; ++r) std::copy_n(src + r * w, w, out.data() + r * total + col);
    col += w;
  }
  return make_result<T>(std::move(out), parts, [widths, rows, total](Node<T>& n) {
    Index col = 0;
    for (std::size_t k = 0; k < n.parents.size(); ++k) {
      auto& p = *n.parents[k];
      const Index w = widths[k];
      if (p.requires_grad) {
        T* g = p.grad_buffer().data();
        for (Index r = 0; r < rows; ++r) {
          const T* src = n.grad.data() + r * total + col;
          for (Index i = 0; i < w; ++i) g[r * w + i] += src[i];
        }
      }
      col += w;
    }
  });
}

template <typename T>
Var<T> slice_last(const Var<T>& a, Index begin, Index count) {
  const Index c = a.dim(-1);
  if (begin < 0 || count < 0 || begin + count > c) {
    throw std::invalid_argument("slice_last: range out of bounds for " + shape_string(a.shape()));
  }
  Shape s = a.shape();
  s.back() = count;
  const Index rows = a.value().size() / std::max<Index>(c, 1);
  Tensor<T> out(s);
  for (Index r = 0; r < rows; ++r)
    std::copy_n(a.value().data() + r * c + begin, count, out.data() + r * count);
  return make_result<T>(std::move(out), {a}, [c, rows, begin, count](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    for (Index r = 0; r < rows; ++r)
      for (Index i = 0; i < count; ++i) g[r * c + begin + i] += n.grad[r * count + i];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    for (Index i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> select_per_sample(const std::vector<Var<T>>& candidates, const std::vector<int>& index) {
  if (candidates.empty()) throw std::invalid_argument("select_per_sample: no candidates");
  const Index batch = static_cast<Index>(index.size());
  for (const auto& c : candidates) {
    if (c.value().rank() != 1 || c.dim(0) != batch) {
      throw std::invalid_argument("select_per_sample: candidates must be rank-1 of batch length");
    }
  }
  Tensor<T> out(Shape{batch});
  for (Index b = 0; b < batch; ++b) {
    const int k = index[static_cast<std::size_t>(b)];
    if (k < 0 || k >= static_cast<int>(candidates.size())) {
      throw std::invalid_argument("select_per_sample: index out of range");
    }
    out[b] = candidates[static_cast<std::size_t>(k)].value()[b];
  }
  return make_result<T>(std::move(out), candidates, [index](Node<T>& n) {
    for (std::size_t b = 0; b < index.size(); ++b) {
      auto& p = *n.parents[static_cast<std::size_t>(index[b])];
      if (p.requires_grad) p.grad_buffer()[static_cast<Index>(b)] += n.grad[static_cast<Index>(b)];
    }
  });
}

namespace {

struct ConvGeom {
  Index n, t, w, h, ci;
  Index to, wo, ho, co;
  Triple k, s, p;
  Index rows() const { return to * wo * ho; }
  Index cols() const { return Index{k[0]} * k[1] * k[2] * ci; }
  bool pointwise() const {
    return k == Triple{1, 1, 1} && s == Triple{1, 1, 1} && p == Triple{0, 0, 0};
  }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const Index row_len = g.cols();
  for (Index ot = 0; ot < g.to; ++ot)
    for (Index ox = 0; ox < g.wo; ++ox)
      for (Index oy = 0; oy < g.ho; ++oy) {
        T* dst = col + ((ot * g.wo + ox) * g.ho + oy) * row_len;
        for (int a = 0; a < g.k[0]; ++a) {
          const Index it = ot * g.s[0] - g.p[0] + a;
          for (int b = 0; b < g.k[1]; ++b) {
            const Index ix = ox * g.s[1] - g.p[1] + b;
            for (int c = 0; c < g.k[2]; ++c, dst += g.ci) {
              const Index iy = oy * g.s[2] - g.p[2] + c;
              if (it < 0 || it >= g.t || ix < 0 || ix >= g.w || iy < 0 || iy >= g.h) {
                std::fill_n(dst, g.ci, T{0});
              } else {
                std::copy_n(x + ((it * g.w + ix) * g.h + iy) * g.ci, g.ci, dst);
              }
            }
          }
        }
      }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, T* dx) {
  const Index row_len = g.cols();
  for (Index ot = 0; ot < g.to; ++ot)
    for (Index ox = 0; ox < g.wo; ++ox)
      for (Index oy = 0; oy < g.ho; ++oy) {
        const T* src = col + ((ot * g.wo + ox) * g.ho + oy) * row_len;
        for (int a = 0; a < g.k[0]; ++a) {
          const Index it = ot * g.s[0] - g.p[0] + a;
          for (int b = 0; b < g.k[1]; ++b) {
            const Index ix = ox * g.s[1] - g.p[1] + b;
            for (int c = 0; c < g.k[2]; ++c, src += g.ci) {
              const Index iy = oy * g.s[2] - g.p[2] + c;
              if (it < 0 || it >= g.t || ix < 0 || ix >= g.w || iy < 0 || iy >= g.h) continue;
              T* d = dx + ((it * g.w + ix) * g.h + iy) * g.ci;
              for (Index i = 0; i < g.ci; ++i) d[i] += src[i];
            }
          }
        }
      }
}

}  // namespace

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvSpec& spec) {
  require_rank(x, 5, "conv3d input");
  require_rank(w, 5, "conv3d weight");
  ConvGeom g{};
  g.n = x.dim(0);
  g.t = x.dim(1);
  g.w = x.dim(2);
  g.h = x.dim(3);
  g.ci = x.dim(4);
  g.k = {static_cast<int>(w.dim(0)), static_cast<int>(w.dim(1)), static_cast<int>(w.dim(2))};
  g.s = spec.stride;
  g.p = spec.pad;
  if (w.dim(3) != g.ci) {
    throw std::invalid_argument("conv3d: weight expects " + std::to_string(w.dim(3)) +
                                " input channels, got " + std::to_string(g.ci));
  }
  g.co = w.dim(4);
  const Index in_dims[3] = {g.t, g.w, g.h};
  Index out_dims[3];
  for (int a = 0; a < 3; ++a) {
    const Index span = in_dims[a] + 2 * g.p[a] - g.k[a];
    if (span < 0 || g.s[a] < 1) throw std::invalid_argument("conv3d: kernel larger than input");
    out_dims[a] = span / g.s[a] + 1;
  }
  g.to = out_dims[0];
  g.wo = out_dims[1];
  g.ho = out_dims[2];
  const bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.dim(0) != g.co)) {
    throw std::invalid_argument("conv3d: bias shape mismatch");
  }

  Tensor<T> out(Shape{g.n, g.to, g.wo, g.ho, g.co});
  const Index in_stride = g.t * g.w * g.h * g.ci;
  const Index out_stride = g.rows() * g.co;
  std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
  for (Index s = 0; s < g.n; ++s) {
    const T* xs = x.value().data() + s * in_stride;
    const T* a = xs;
    if (!g.pointwise()) {
      im2col(xs, g, col.data());
      a = col.data();
    }
    T* ys = out.data() + s * out_stride;
    detail::gemm(a, g.rows(), g.cols(), false, w.value().data(), g.cols(), g.co, false, ys, false);
    if (has_bias) {
      const T* bv = b.value().data();
      for (Index r = 0; r < g.rows(); ++r)
        for (Index c = 0; c < g.co; ++c) ys[r * g.co + c] += bv[c];
    }
  }

  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [g, has_bias, in_stride, out_stride](Node<T>& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
    for (Index s = 0; s < g.n; ++s) {
      const T* gy = n.grad.data() + s * out_stride;
      if (pw.requires_grad) {
        const T* a = px.value.data() + s * in_stride;
        if (!g.pointwise()) {
          im2col(a, g, col.data());
          a = col.data();
        }
        detail::gemm(a, g.rows(), g.cols(), true, gy, g.rows(), g.co, false,
                     pw.grad_buffer().data(), true);
      }
      if (px.requires_grad) {
        T* gx = px.grad_buffer().data() + s * in_stride;
        if (g.pointwise()) {
          detail::gemm(gy, g.rows(), g.co, false, pw.value.data(), g.cols(), g.co, true, gx, true);
        } else {
          detail::gemm(gy, g.rows(), g.co, false, pw.value.data(), g.cols(), g.co, true, col.data(),
                       false);
          col2im(col.data(), g, gx);
        }
      }
    }
    if (has_bias && n.parents[2]->requires_grad) {
      T* gb = n.parents[2]->grad_buffer().data();
      const Index rows = g.n * g.rows();
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < g.co; ++c) gb[c] += n.grad[r * g.co + c];
    }
  });
}

template <typename T>
Var<T> upconv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Triple kernel) {
  require_rank(x, 5, "upconv3d input");
  require_rank(w, 5, "upconv3d weight");
  const Index n = x.dim(0), t = x.dim(1), wd = x.dim(2), h = x.dim(3), ci = x.dim(4);
  if (w.dim(0) != ci || w.dim(1) != kernel[0] || w.dim(2) != kernel[1] || w.dim(3) != kernel[2]) {
    throw std::invalid_argument("upconv3d: weight shape " + shape_string(w.shape()) +
                                " incompatible with input " + shape_string(x.shape()));
  }
  const Index co = w.dim(4);
  const Index kk = Index{kernel[0]} * kernel[1] * kernel[2];
  const Index rows = t * wd * h;
  const Index to = t * kernel[0], wo = wd * kernel[1], ho = h * kernel[2];
  const bool has_bias = b.defined();
  Tensor<T> out(Shape{n, to, wo, ho, co});
  std::vector<T> z(static_cast<std::size_t>(rows * kk * co));

  // Maps (input row, kernel offset) to the output voxel offset within a sample.
  auto out_offset = [=](Index r, Index k) {
    const Index iy = r % h, ix = (r / h) % wd, it = r / (h * wd);
    const Index c = k % kernel[2], bb = (k / kernel[2]) % kernel[1], a = k / (kernel[2] * kernel[1]);
    return (((it * kernel[0] + a) * wo + ix * kernel[1] + bb) * ho + iy * kernel[2] + c) * co;
  };

  for (Index s = 0; s < n; ++s) {
    detail::gemm(x.value().data() + s * rows * ci, rows, ci, false, w.value().data(), ci, kk * co,
                 false, z.data(), false);
    T* ys = out.data() + s * to * wo * ho * co;
    for (Index r = 0; r < rows; ++r)
      for (Index k = 0; k < kk; ++k) {
        T* dst = ys + out_offset(r, k);
        const T* src = z.data() + (r * kk + k) * co;
        for (Index c = 0; c < co; ++c) dst[c] = src[c] + (has_bias ? b.value()[c] : T{0});
      }
  }

  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [=](Node<T>& nd) {
    auto& px = *nd.parents[0];
    auto& pw = *nd.parents[1];
    std::vector<T> gz(static_cast<std::size_t>(rows * kk * co));
    const Index out_stride = to * wo * ho * co;
    for (Index s = 0; s < n; ++s) {
      const T* gy = nd.grad.data() + s * out_stride;
      for (Index r = 0; r < rows; ++r)
        for (Index k = 0; k < kk; ++k)
          std::copy_n(gy + out_offset(r, k), co, gz.data() + (r * kk + k) * co);
      if (pw.requires_grad) {
        detail::gemm(px.value.data() + s * rows * ci, rows, ci, true, gz.data(), rows, kk * co,
                     false, pw.grad_buffer().data(), true);
      }
      if (px.requires_grad) {
        detail::gemm(gz.data(), rows, kk * co, false, pw.value.data(), ci, kk * co, true,
                     px.grad_buffer().data() + s * rows * ci, true);
      }
    }
    if (has_bias && nd.parents[2]->requires_grad) {
      T* gb = nd.parents[2]->grad_buffer().data();
      const Index total = nd.grad.size() / co;
      for (Index r = 0; r < total; ++r)
        for (Index c = 0; c < co; ++c) gb[c] += nd.grad[r * co + c];
    }
  });
}

template <typename T>
Var<T> max_pool3d(const Var<T>& x, Triple window) {
  require_rank(x, 5, "max_pool3d");
  const Index n = x.dim(0), t = x.dim(1), w = x.dim(2), h = x.dim(3), c = x.dim(4);
  const Index to = t / window[0], wo = w / window[1], ho = h / window[2];
  if (to == 0 || wo == 0 || ho == 0) throw std::invalid_argument("max_pool3d: window too large");
  Tensor<T> out(Shape{n, to, wo, ho, c});
  auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
  const T* xv = x.value().data();
  Index o = 0;
  for (Index s = 0; s < n; ++s)
    for (Index ot = 0; ot < to; ++ot)
      for (Index ox = 0; ox < wo; ++ox)
        for (Index oy = 0; oy < ho; ++oy)
          for (Index ch = 0; ch < c; ++ch, ++o) {
            T best = -std::numeric_limits<T>::infinity();
            Index best_i = 0;
            for (int a = 0; a < window[0]; ++a)
              for (int b = 0; b < window[1]; ++b)
                for (int d = 0; d < window[2]; ++d) {
                  const Index i =
                      ((((s * t + ot * window[0] + a) * w + ox * window[1] + b) * h) + oy * window[2] + d) * c + ch;
                  if (xv[i] > best) {
                    best = xv[i];
                    best_i = i;
                  }
                }
            out[o] = best;
            (*argmax)[static_cast<std::size_t>(o)] = best_i;
          }
  return make_result<T>(std::move(out), {x}, [argmax](Node<T>& nd) {
    auto& p = *nd.parents[0];
    if (!p.requires_grad) return;
    T* g = p.grad_buffer().data();
    for (Index i = 0; i < nd.grad.size(); ++i) g[(*argmax)[static_cast<std::size_t>(i)]] += nd.grad[i];
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  if (x.value().rank() < 2) throw std::invalid_argument("global_avg_pool: rank < 2");
  const Index n = x.dim(0), c = x.dim(-1);
  const Index per = x.value().size() / std::max<Index>(n * c, 1);
  Tensor<T> out(Shape{n, c});
  for (Index s = 0; s < n; ++s)
    for (Index p = 0; p < per; ++p)
      for (Index ch = 0; ch < c; ++ch) out[s * c + ch] += x.value()[(s * per + p) * c + ch];
  const T inv = T{1} / static_cast<T>(per);
  for (Index i = 0; i < out.size(); ++i) out[i] *= inv;
  return make_result<T>(std::move(out), {x}, [n, c, per, inv](Node<T>& nd) {
    auto& px = *nd.parents[0];
    if (!px.requires_grad) return;
    T* g = px.grad_buffer().data();
    for (Index s = 0; s < n; ++s)
      for (Index p = 0; p < per; ++p)
        for (Index ch = 0; ch < c; ++ch) g[(s * per + p) * c + ch] += nd.grad[s * c + ch] * inv;
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require_rank(w, 2, "linear weight");
  const Index ci = x.dim(-1);
  if (w.dim(0) != ci) throw std::invalid_argument("linear: input width mismatch");
  const Index co = w.dim(1);
  const Index rows = x.value().size() / std::max<Index>(ci, 1);
  Shape s = x.shape();
  s.back() = co;
  Tensor<T> out(s);
  detail::gemm(x.value().data(), rows, ci, false, w.value().data(), ci, co, false, out.data(), false);
  const bool has_bias = b.defined();
  if (has_bias) {
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < co; ++c) out[r * co + c] += b.value()[c];
  }
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [rows, ci, co, has_bias](Node<T>& nd) {
    auto& px = *nd.parents[0];
    auto& pw = *nd.parents[1];
    if (pw.requires_grad)
      detail::gemm(px.value.data(), rows, ci, true, nd.grad.data(), rows, co, false,
                   pw.grad_buffer().data(), true);
    if (px.requires_grad)
      detail::gemm(nd.grad.data(), rows, co, false, pw.value.data(), ci, co, true,
                   px.grad_buffer().data(), true);
    if (has_bias && nd.parents[2]->requires_grad) {
      T* gb = nd.parents[2]->grad_buffer().data();
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < co; ++c) gb[c] += nd.grad[r * co + c];
    }
  });
}

namespace {

struct AxisTaps {
  std::vector<Index> lo, hi;
  std::vector<double> w_hi;
};

AxisTaps axis_taps(Index in, Index out) {
  AxisTaps taps;
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (Index o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const Index lo = static_cast<Index>(std::floor(src));
    const Index hi = std::min(lo + 1, in - 1);
    taps.lo.push_back(lo);
    taps.hi.push_back(hi);
    taps.w_hi.push_back(src - static_cast<double>(lo));
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> resize_trilinear(const Var<T>& x, Triple size) {
  require_rank(x, 5, "resize_trilinear");
  const Index n = x.dim(0), c = x.dim(4);
  const Index in[3] = {x.dim(1), x.dim(2), x.dim(3)};
  for (int a = 0; a < 3; ++a) {
    if (size[a] < 1) throw std::invalid_argument("resize_trilinear: target dims must be positive");
  }
  auto taps = std::make_shared<std::array<AxisTaps, 3>>();
  for (int a = 0; a < 3; ++a) (*taps)[a] = axis_taps(in[a], size[a]);
  Tensor<T> out(Shape{n, size[0], size[1], size[2], c});

  // Visits every (output voxel, input tap, weight) triple.
  auto for_each_tap = [n, c, in, size, taps](auto&& fn) {
    const auto& [tt, tx, ty] = *taps;
    Index o = 0;
    for (Index s = 0; s < n; ++s)
      for (Index ot = 0; ot < size[0]; ++ot)
        for (Index ox = 0; ox < size[1]; ++ox)
          for (Index oy = 0; oy < size[2]; ++oy, o += c) {
            const Index it[2] = {tt.lo[ot], tt.hi[ot]};
            const Index ix[2] = {tx.lo[ox], tx.hi[ox]};
            const Index iy[2] = {ty.lo[oy], ty.hi[oy]};
            const double wt[2] = {1.0 - tt.w_hi[ot], tt.w_hi[ot]};
            const double wx[2] = {1.0 - tx.w_hi[ox], tx.w_hi[ox]};
            const double wy[2] = {1.0 - ty.w_hi[oy], ty.w_hi[oy]};
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int d = 0; d < 2; ++d) {
                  const double wgt = wt[a] * wx[b] * wy[d];
                  if (wgt == 0.0) continue;
                  const Index i = (((s * in[0] + it[a]) * in[1] + ix[b]) * in[2] + iy[d]) * c;
                  fn(o, i, static_cast<T>(wgt));
                }
          }
  };
  const T* xv = x.value().data();
  T* ov = out.data();
  for_each_tap([&](Index o, Index i, T wgt) {
    for (Index ch = 0; ch < c; ++ch) ov[o + ch] += wgt * xv[i + ch];
  });
  return make_result<T>(std::move(out), {x}, [for_each_tap, c](Node<T>& nd) {
    auto& px = *nd.parents[0];
    if (!px.requires_grad) return;
    T* g = px.grad_buffer().data();
    const T* gy = nd.grad.data();
    for_each_tap([&](Index o, Index i, T wgt) {
      for (Index ch = 0; ch < c; ++ch) g[i + ch] += wgt * gy[o + ch];
    });
  });
}

#define C3_INSTANTIATE_OPS(T)                                                                   \
  template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> scale(const Var<T>&, T);                                                      \
  template Var<T> relu(const Var<T>&);                                                          \
  template Var<T> leaky_relu(const Var<T>&, T);                                                \
  template Var<T> sigmoid(const Var<T>&);                                                       \
  template Var<T> abs(const Var<T>&);                                                           \
  template Var<T> sum(const Var<T>&);                                                           \
  template Var<T> mean(const Var<T>&);                                                          \
  template Var<T> softmax_last(const Var<T>&);                                                  \
  template Var<T> concat_last(const std::vector<Var<T>>&);                                      \
  template Var<T> slice_last(const Var<T>&, Index, Index);                                      \
  template Var<T> reshape(const Var<T>&, Shape);                                                \
  template Var<T> select_per_sample(const std::vector<Var<T>>&, const std::vector<int>&);       \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvSpec&);         \
  template Var<T> upconv3d(const Var<T>&, const Var<T>&, const Var<T>&, Triple);                \
  template Var<T> max_pool3d(const Var<T>&, Triple);                                            \
  template Var<T> global_avg_pool(const Var<T>&);                                               \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                          \
  template Var<T> resize_trilinear(const Var<T>&, Triple);

C3_INSTANTIATE_OPS(float)
C3_INSTANTIATE_OPS(double)

}  // namespace ops
}  // namespace c3
