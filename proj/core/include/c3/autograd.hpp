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

// Minimal define-by-run reverse-mode differentiation. A Var is a shared handle
// to a graph node; ops build nodes that remember their parents and a closure
// that pushes the node's gradient into those parents.

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "c3/tensor.hpp"

namespace c3 {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Lazily allocated so that constant subgraphs never pay for gradients.
  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && !grad.empty(); }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Gradient accumulated by the last backward(); zeros if none reached this node.
  Tensor<T> grad() const {
    if (node_->has_grad()) return node_->grad;
    return Tensor<T>(node_->value.shape());
  }
  void zero_grad() { node_->grad = Tensor<T>(); }

  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& handle() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds a result node. If no parent requires a gradient the closure and the
// parent links are dropped, so inference graphs hold no history.
template <typename T>
Var<T> make_result(Tensor<T> value, const std::vector<Var<T>>& parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.handle());
    n->backward = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

// Evaluation barrier: same value, no gradient path to the argument.
template <typename T>
Var<T> stop_gradient(const Var<T>& v) {
  return Var<T>::constant(v.value());
}

// Seeds d(root)/d(root) = 1 for every element of root and propagates to all
// ancestors that require gradients. Gradients accumulate into leaves.
template <typename T>
void backward(const Var<T>& root) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  std::unordered_set<Node<T>*> visited;
  // Iterative post-order DFS.
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().fill(T{1});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->has_grad()) n->backward(*n);
  }
  // Interior gradients are not needed after the sweep; leaves keep theirs.
  for (Node<T>* n : order) {
    if (n->backward) n->grad = Tensor<T>();
  }
}

}  // namespace c3
