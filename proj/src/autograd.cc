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

#include "sch/autograd.h"

#include <unordered_set>

namespace sch {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Var<T> MakeResult(Tensor<T> value, std::vector<Var<T>> inputs,
                  std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var<T>(node);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return Var<T>(node);
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.node());
  node->backward = std::move(backward);
  return Var<T>(node);
}

template <typename T>
void Var<T>::Backward() {
  if (numel() != 1) {
    throw DimensionError("Backward() without seed needs a scalar, got " +
                         ShapeString(shape()));
  }
  Backward(Tensor<T>(shape(), T(1)));
}

template <typename T>
void Var<T>::Backward(const Tensor<T>& seed) {
  if (seed.shape() != shape()) {
    throw DimensionError("gradient seed shape " + ShapeString(seed.shape()) +
                         " does not match " + ShapeString(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  // Owning pointers: releasing a node's inputs below must not free nodes
  // that are still queued.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<std::shared_ptr<Node<T>>, size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      std::shared_ptr<Node<T>> child = node->inputs[next++];
      if (child->requires_grad && !visited.count(child.get())) {
        visited.insert(child.get());
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  Tensor<T>& g = node_->Grad();
  for (int64_t i = 0; i < g.numel(); ++i) g[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    if (!node->backward) continue;  // leaf: keep its gradient
    if (node->has_grad()) node->backward(*node);
    // Interior nodes are consumed; release memory as we go.
    node->grad = Tensor<T>();
    node->backward = nullptr;
    node->inputs.clear();
  }
}

template Var<float> MakeResult(Tensor<float>, std::vector<Var<float>>,
                               std::function<void(Node<float>&)>);
template Var<double> MakeResult(Tensor<double>, std::vector<Var<double>>,
                                std::function<void(Node<double>&)>);
template class Var<float>;
template class Var<double>;

}  // namespace sch
