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

#ifndef MAST_TENSOR_HPP_
#define MAST_TENSOR_HPP_

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mast/common.hpp"

namespace mast {

// Dense row-major tensor with reverse-mode differentiation over a closed op
// set. float is the training scalar; the double instantiation exists for the
// finite-difference gradient oracle. Values are immutable once produced by an
// op; only leaf tensors (parameters) are mutated, and only by init code and
// the optimizer between steps.
template <class S>
class TensorT;

template <class S>
struct GradTape;

namespace detail {

template <class S>
struct Node {
  Shape shape;
  std::vector<S> value;
  // User-facing accumulated gradient (parameters, gradient checks). Filled by
  // TensorT::backward(); cleared explicitly by the caller.
  std::vector<S> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  // Parents and the pullback are only recorded while tracking; inference
  // passes build no graph.
  std::vector<std::shared_ptr<Node>> parents;
  // Reads the node's upstream gradient, accumulates into the parents' tape
  // buffers. Must be pure: walks over a shared graph may run concurrently.
  std::function<void(const std::vector<S>& gout, GradTape<S>& tape)> pullback;
};

}  // namespace detail

// Walk-local gradient storage. Keeping gradients off the nodes makes a
// backward pass re-entrant, so disjoint subgraphs hanging off shared frozen
// parameters can be walked from different threads.
template <class S>
struct GradTape {
  std::unordered_map<const detail::Node<S>*, std::vector<S>> buffers;

  std::vector<S>& acc(const std::shared_ptr<detail::Node<S>>& n) {
    auto& buf = buffers[n.get()];
    if (buf.empty()) buf.assign(n->value.size(), S(0));
    return buf;
  }
};

template <class S>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape shape) { return full(std::move(shape), S(0)); }
  static TensorT full(Shape shape, S fill);
  static TensorT from_data(Shape shape, std::vector<S> data);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(n_->value.size()); }

  std::span<const S> data() const { return n_->value; }
  // Mutable access for initialization and optimizer updates on leaves.
  std::span<S> data_mut() { return n_->value; }
  S item() const;

  bool requires_grad() const { return n_ && n_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    n_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return n_ && !n_->grad.empty(); }
  std::span<const S> grad() const { return n_->grad; }
  std::span<S> grad_mut() { return n_->grad; }
  void zero_grad() {
    if (n_) n_->grad.assign(n_->value.size(), S(0));
  }

  // Value copy with no graph attached.
  TensorT detach() const {
    return from_data(n_->shape, n_->value);
  }

  // Reverse-mode sweep from a scalar. Accumulates (additively) into .grad of
  // every tracked tensor reachable from this one.
  void backward() const;

  const char* op_name() const { return n_->op; }

  // Internal: graph plumbing for ops and backward drivers.
  detail::Node<S>* node() const { return n_.get(); }
  const std::shared_ptr<detail::Node<S>>& node_ptr() const { return n_; }
  static TensorT from_node(std::shared_ptr<detail::Node<S>> n) {
    return TensorT(std::move(n));
  }

 private:
  explicit TensorT(std::shared_ptr<detail::Node<S>> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::Node<S>> n_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

// ---------------------------------------------------------------------------
// Backward drivers (free functions; the fast paths used by training loops).

// Seeded reverse sweep from `root` (any shape; seed must match its size).
// Gradients of tracked nodes in `stop` are collected into `boundary_grads`
// and the walk does not continue past them. Gradients of leaves (tracked
// nodes with no parents) are handed to `leaf_sink` keyed by node pointer;
// everything else stays tape-local and is dropped. When `leaf_sink` is null,
// leaf gradients accumulate into the node's own .grad (not thread-safe).
template <class S>
void backward_seeded(
    const TensorT<S>& root, const std::vector<S>& seed,
    const std::unordered_set<const detail::Node<S>*>* stop,
    std::unordered_map<const detail::Node<S>*, std::vector<S>>* boundary_grads,
    std::unordered_map<const detail::Node<S>*, std::vector<S>>* leaf_sink);

// ---------------------------------------------------------------------------
// The closed op set. Every op defines gradients for all tensor inputs.

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);
template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
// Broadcasts a [D] row vector over the last dimension.
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& bias);
template <class S>
TensorT<S> scale(const TensorT<S>& x, S c);
template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <class S>
TensorT<S> transpose(const TensorT<S>& x);
template <class S>
TensorT<S> gelu(const TensorT<S>& x);
template <class S>
TensorT<S> softmax_lastdim(const TensorT<S>& x);
template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                      const TensorT<S>& beta, double eps);
// Depthwise 2-D convolution on a [T, F, C] grid with per-channel [kt, kf]
// kernels packed as [C, kt, kf]; zero padding.
template <class S>
TensorT<S> conv2d_grid(const TensorT<S>& x, const TensorT<S>& kernel,
                       int stride_t, int stride_f, int pad_t, int pad_f);
// Mean over rows: [N, D] -> [1, D].
template <class S>
TensorT<S> mean_pool_rows(const TensorT<S>& x);
template <class S>
TensorT<S> sum_all(const TensorT<S>& x);
// rows of `table` selected by index: [R, D] x idx[n] -> [n, D].
template <class S>
TensorT<S> gather_rows(const TensorT<S>& table, const std::vector<int>& idx);
// Inverse placement: rows of x land at idx in an otherwise-zero [rows, D].
template <class S>
TensorT<S> scatter_rows(const TensorT<S>& x, const std::vector<int>& idx,
                        int rows);
// out[i][j] = x[i][idx[i*m+j]] for x [L, R], idx flattened [L*m] -> [L, m].
template <class S>
TensorT<S> take_along_lastdim(const TensorT<S>& x, const std::vector<int>& idx,
                              int m);
template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts);
template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts);
template <class S>
TensorT<S> slice_cols(const TensorT<S>& x, int c0, int c1);
template <class S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape);
template <class S>
TensorT<S> l2_normalize_rows(const TensorT<S>& x);
// Mean over rows of -log softmax(logits)[label]; logits [N, C].
template <class S>
TensorT<S> cross_entropy(const TensorT<S>& logits,
                         const std::vector<int>& labels);

}  // namespace mast

#endif  // MAST_TENSOR_HPP_
