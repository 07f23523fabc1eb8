// Copyright 2026 The SCH Codec Authors. All Rights Reserved.
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

#ifndef SCH_AUTOGRAD_H_
#define SCH_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sch/tensor.h"

namespace sch {

// Reverse-mode automatic differentiation over Tensor values.
//
// Every op produces a Var whose node remembers its inputs and a closure that
// propagates the node's gradient into them. Backward() walks the graph in
// reverse topological order. Graph construction is skipped entirely when
// gradients are disabled (see NoGradGuard) or no input requires a gradient.

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Gradient buffer, zero-initialized on first use.
  Tensor<T>& Grad() {
    if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.numel() == value.numel(); }
};

bool GradEnabled();

// Disables graph construction for the lifetime of the guard (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() : node_(std::make_shared<Node<T>>()) {}
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(int i) const { return node_->value.dim(i); }
  int64_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad(); }
  // Gradient accumulated by Backward(); zeros if none was propagated.
  const Tensor<T>& grad() const { return node_->Grad(); }
  Tensor<T>& mutable_grad() { return node_->Grad(); }
  void ZeroGrad() { node_->grad = Tensor<T>(); }

  // Seeds d(self)/d(self) = 1 for a single-element Var.
  void Backward();
  void Backward(const Tensor<T>& seed);

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds the result node of an op. `backward` receives the result node; its
// grad is populated and it accumulates into node.inputs[i]->Grad() for the
// inputs that require gradients.
template <typename T>
Var<T> MakeResult(Tensor<T> value, std::vector<Var<T>> inputs,
                  std::function<void(Node<T>&)> backward);

// Treats `x` as a constant in any graph built from the result.
template <typename T>
Var<T> Detach(const Var<T>& x) {
  return Var<T>(x.value());
}

}  // namespace sch

#endif  // SCH_AUTOGRAD_H_
