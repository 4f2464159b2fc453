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

#ifndef MAST_ATTENTION_HPP_
#define MAST_ATTENTION_HPP_

#include <utility>
#include <vector>

#include "mast/patches.hpp"
#include "mast/tensor.hpp"

namespace mast {

// Kernel, stride and padding of one convolutional pooling operator.
struct PoolSpec {
  int kernel_t = 1;
  int kernel_f = 1;
  int stride_t = 1;
  int stride_f = 1;
  int pad_t = 0;
  int pad_f = 0;

  bool pools() const { return stride_t > 1 || stride_f > 1; }
};

void validate_pool_spec(const PoolSpec& spec);

// floor((len + 2*pad - kernel) / stride) + 1.
int pooled_len(int len, int kernel, int stride, int pad);
std::pair<int, int> pooled_grid(int grid_t, int grid_f, const PoolSpec& spec);

// Pools `tokens` (row-aligned with geometry `geo`) via a learnable depthwise
// convolution with per-channel kernels `kernel` [D, kt, kf]. Positions
// missing from geo.kept are zero-filled on the grid before convolving; a
// pooled position survives iff any kept input position falls in its window.
// The returned geometry carries the pooled grid, kept list and cumulative
// strides.
template <class S>
PatchGridT<S> pool_tokens(const TensorT<S>& tokens, const PatchGridT<S>& geo,
                          const TensorT<S>& kernel, const PoolSpec& spec);

// (time, freq) coordinates of kept tokens in the input patch-grid frame:
// grid index times the grid's cumulative stride per axis.
std::vector<std::pair<int, int>> grid_coords(int grid_f,
                                             const std::vector<int>& kept,
                                             int stride_t, int stride_f);

// Decomposed relative position bias for one head:
// E[i][j] = Q_i . R_time[dt(i,j)] + Q_i . R_freq[df(i,j)], with coordinate
// deltas clamped to +/- max_delta. Depends only on coordinate differences,
// so it is invariant under joint translation of both coordinate sets.
template <class S>
TensorT<S> relative_bias(const TensorT<S>& q_head,
                         const TensorT<S>& rpe_time_head,
                         const TensorT<S>& rpe_freq_head,
                         const std::vector<std::pair<int, int>>& q_coords,
                         const std::vector<std::pair<int, int>>& kv_coords,
                         int max_delta);

// Projection weights, pooling operators and relative position tables of one
// multi-head pooling attention instance. K and V carry their own PoolSpec
// but must share a stride. RPE tables are [2*max_delta+1, D] and sliced per
// head; leave them undefined to disable the bias term.
template <class S>
struct MhpaParamsT {
  TensorT<S> w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  TensorT<S> pool_q_w, pool_k_w, pool_v_w;  // [D, kt, kf] each
  PoolSpec pool_q, pool_k, pool_v;
  int heads = 1;
  TensorT<S> rpe_time, rpe_freq;
  int max_delta = 0;
};

using MhpaParams = MhpaParamsT<float>;

// Multi-head pooling attention. Per head h:
//   Q = Pool(X Wq), K = Pool(X Wk), V = Pool(X Wv)
//   A = softmax((Q K^T + E_rel) / sqrt(d))
//   Z = A V + Q                       (residual pooling connection)
// then heads are concatenated and projected by Wo. The output token count is
// the pooled Q count. Q may pool with stride > 1 only when
// first_block_of_stage.
template <class S>
PatchGridT<S> mhpa(const PatchGridT<S>& x, const MhpaParamsT<S>& p,
                   bool first_block_of_stage);

// Pre-norm transformer block:
//   x' = PoolQ(x) + MHPA(LN(x))
//   y  = proj(x') + MLP(LN(x'))
// The attention skip is pooled with the Q pooling operator (shared weights),
// so identity pooling keeps the skip exact. MLP hidden width is 4*D with
// GELU; when expanding, the MLP emits 2*D and the MLP skip runs through the
// learned res_w/res_b projection.
template <class S>
struct BlockParamsT {
  TensorT<S> ln1_g, ln1_b, ln2_g, ln2_b;
  MhpaParamsT<S> attn;
  TensorT<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  TensorT<S> res_w, res_b;  // defined only when the block expands the dim
  bool expands() const { return res_w.defined(); }
};

using BlockParams = BlockParamsT<float>;

template <class S>
PatchGridT<S> transformer_block(const PatchGridT<S>& x,
                                const BlockParamsT<S>& p,
                                bool first_block_of_stage);

}  // namespace mast

#endif  // MAST_ATTENTION_HPP_
