// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#include "mast/tensor.hpp"

#include <algorithm>

namespace mast {

template <class S>
TensorT<S> TensorT<S>::full(Shape shape, S fill) {
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor extent must be positive, got " +
                                 shape_str(shape));
  }
  auto n = std::make_shared<detail::Node<S>>();
  n->value.assign(static_cast<size_t>(numel(shape)), fill);
  n->shape = std::move(shape);
  return TensorT(std::move(n));
}

template <class S>
TensorT<S> TensorT<S>::from_data(Shape shape, std::vector<S> data) {
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor extent must be positive, got " +
                                 shape_str(shape));
  }
  if (numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<detail::Node<S>>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  return TensorT(std::move(n));
}

template <class S>
S TensorT<S>::item() const {
  if (size() != 1) {
    throw ShapeError("item() requires a scalar tensor, got " +
                     shape_str(shape()));
  }
  return n_->value[0];
}

namespace {

// Iterative post-order topological sort from `root`, not expanding past
// nodes in `stop`. Only tracked nodes are visited.
template <class S>
std::vector<const detail::Node<S>*> topo_order(
    const detail::Node<S>* root,
    const std::unordered_set<const detail::Node<S>*>* stop) {
  std::vector<const detail::Node<S>*> order;
  std::unordered_set<const detail::Node<S>*> visited;
  struct Frame {
    const detail::Node<S>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    bool expandable = !(stop && stop->count(f.node) && f.node != root);
    if (expandable && f.next_parent < f.node->parents.size()) {
      const detail::Node<S>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; walk it in reverse
}

}  // namespace

template <class S>
void backward_seeded(
    const TensorT<S>& root, const std::vector<S>& seed,
    const std::unordered_set<const detail::Node<S>*>* stop,
    std::unordered_map<const detail::Node<S>*, std::vector<S>>* boundary_grads,
    std::unordered_map<const detail::Node<S>*, std::vector<S>>* leaf_sink) {
  const detail::Node<S>* r = root.node();
  if (!r->requires_grad) {
    throw ArgumentError("backward on a tensor that does not require grad");
  }
  if (seed.size() != r->value.size()) {
    throw ShapeError("backward seed size " + std::to_string(seed.size()) +
                     " does not match root " + shape_str(r->shape));
  }
  auto order = topo_order<S>(r, stop);
  GradTape<S> tape;
  tape.buffers[r] = seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const detail::Node<S>* n = *it;
    auto found = tape.buffers.find(n);
    if (found == tape.buffers.end()) continue;  // unreached side branch
    std::vector<S>& g = found->second;
    bool is_boundary = stop && stop->count(n) && n != r;
    if (!is_boundary && n->pullback) {
      n->pullback(g, tape);
    }
    if (is_boundary) {
      if (boundary_grads) {
        auto& dst = (*boundary_grads)[n];
        if (dst.empty()) dst.assign(n->value.size(), S(0));
        for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
    } else if (leaf_sink) {
      if (n->parents.empty()) {
        auto& dst = (*leaf_sink)[n];
        if (dst.empty()) dst.assign(n->value.size(), S(0));
        for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
    } else {
      // Accumulate into every tracked ancestor, additively across calls.
      auto* mut = const_cast<detail::Node<S>*>(n);
      if (mut->grad.empty()) mut->grad.assign(mut->value.size(), S(0));
      for (size_t i = 0; i < g.size(); ++i) mut->grad[i] += g[i];
    }
    tape.buffers.erase(n);  // frontier-only peak memory
  }
}

template <class S>
void TensorT<S>::backward() const {
  if (size() != 1) {
    throw ArgumentError("backward requires a scalar loss, got shape " +
                        shape_str(shape()));
  }
  backward_seeded<S>(*this, {S(1)}, nullptr, nullptr, nullptr);
}

template class TensorT<float>;
template class TensorT<double>;

template void backward_seeded<float>(
    const TensorT<float>&, const std::vector<float>&,
    const std::unordered_set<const detail::Node<float>*>*,
    std::unordered_map<const detail::Node<float>*, std::vector<float>>*,
    std::unordered_map<const detail::Node<float>*, std::vector<float>>*);
template void backward_seeded<double>(
    const TensorT<double>&, const std::vector<double>&,
    const std::unordered_set<const detail::Node<double>*>*,
    std::unordered_map<const detail::Node<double>*, std::vector<double>>*,
    std::unordered_map<const detail::Node<double>*, std::vector<double>>*);

}  // namespace mast
