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

#include "mast/attention.hpp"

#include <algorithm>
#include <cmath>

namespace mast {

void validate_pool_spec(const PoolSpec& spec) {
  if (spec.kernel_t < 1 || spec.kernel_f < 1 || spec.stride_t < 1 ||
      spec.stride_f < 1 || spec.pad_t < 0 || spec.pad_f < 0) {
    throw ConfigError("pool spec: kernel/stride must be >= 1, padding >= 0");
  }
  if (spec.pad_t >= spec.kernel_t || spec.pad_f >= spec.kernel_f) {
    throw ConfigError("pool spec: padding must be smaller than the kernel");
  }
}

int pooled_len(int len, int kernel, int stride, int pad) {
  if (len < 1 || kernel < 1 || stride < 1 || pad < 0) {
    throw ArgumentError("pooled_len: bad arguments");
  }
  if (len + 2 * pad < kernel) {
    throw ArgumentError("pooled_len: kernel " + std::to_string(kernel) +
                        " larger than padded length " +
                        std::to_string(len + 2 * pad));
  }
  return (len + 2 * pad - kernel) / stride + 1;
}

std::pair<int, int> pooled_grid(int grid_t, int grid_f, const PoolSpec& spec) {
  return {pooled_len(grid_t, spec.kernel_t, spec.stride_t, spec.pad_t),
          pooled_len(grid_f, spec.kernel_f, spec.stride_f, spec.pad_f)};
}

namespace {

// A pooled position survives iff its window touches a kept input position.
std::vector<int> pool_kept(const std::vector<int>& kept, int grid_t,
                           int grid_f, const PoolSpec& spec, int out_t,
                           int out_f) {
  std::vector<char> mask(static_cast<size_t>(grid_t) * grid_f, 0);
  for (int k : kept) mask[static_cast<size_t>(k)] = 1;
  std::vector<int> out;
  for (int a = 0; a < out_t; ++a) {
    for (int b = 0; b < out_f; ++b) {
      bool hit = false;
      for (int i = 0; i < spec.kernel_t && !hit; ++i) {
        const int ti = a * spec.stride_t - spec.pad_t + i;
        if (ti < 0 || ti >= grid_t) continue;
        for (int j = 0; j < spec.kernel_f; ++j) {
          const int fj = b * spec.stride_f - spec.pad_f + j;
          if (fj < 0 || fj >= grid_f) continue;
          if (mask[static_cast<size_t>(ti) * grid_f + fj]) {
            hit = true;
            break;
          }
        }
      }
      if (hit) out.push_back(a * out_f + b);
    }
  }
  return out;
}

}  // namespace

template <class S>
PatchGridT<S> pool_tokens(const TensorT<S>& tokens, const PatchGridT<S>& geo,
                          const TensorT<S>& kernel, const PoolSpec& spec) {
  validate_pool_spec(spec);
  if (tokens.rank() != 2 || tokens.dim(0) != geo.count()) {
    throw ArgumentError("pool_tokens: token rows " +
                        std::to_string(tokens.dim(0)) +
                        " do not match kept count " +
                        std::to_string(geo.count()));
  }
  if (kernel.rank() != 3 || kernel.dim(1) != spec.kernel_t ||
      kernel.dim(2) != spec.kernel_f) {
    throw ConfigError("pool_tokens: kernel tensor " +
                      shape_str(kernel.shape()) +
                      " does not match pool spec kernel");
  }
  const int gt = geo.grid_t, gf = geo.grid_f;
  auto full = geo.full() ? tokens : scatter_rows(tokens, geo.kept, gt * gf);
  auto grid3 = reshape(full, {gt, gf, tokens.dim(1)});
  auto pooled3 = conv2d_grid(grid3, kernel, spec.stride_t, spec.stride_f,
                             spec.pad_t, spec.pad_f);
  const int ot = pooled3.dim(0), of = pooled3.dim(1);
  auto flat = reshape(pooled3, {ot * of, tokens.dim(1)});

  PatchGridT<S> out;
  out.grid_t = ot;
  out.grid_f = of;
  out.patch_t = geo.patch_t;
  out.patch_f = geo.patch_f;
  out.stride_t = geo.stride_t * spec.stride_t;
  out.stride_f = geo.stride_f * spec.stride_f;
  if (geo.full()) {
    out.kept = full_kept(ot * of);
    out.tokens = std::move(flat);
  } else {
    out.kept = pool_kept(geo.kept, gt, gf, spec, ot, of);
    if (out.kept.empty()) {
      throw ArgumentError(
          "pool_tokens: pooling windows missed every kept position");
    }
    out.tokens = gather_rows(flat, out.kept);
  }
  return out;
}

std::vector<std::pair<int, int>> grid_coords(int grid_f,
                                             const std::vector<int>& kept,
                                             int stride_t, int stride_f) {
  std::vector<std::pair<int, int>> coords;
  coords.reserve(kept.size());
  for (int k : kept) {
    coords.emplace_back((k / grid_f) * stride_t, (k % grid_f) * stride_f);
  }
  return coords;
}

template <class S>
TensorT<S> relative_bias(const TensorT<S>& q_head,
                         const TensorT<S>& rpe_time_head,
                         const TensorT<S>& rpe_freq_head,
                         const std::vector<std::pair<int, int>>& q_coords,
                         const std::vector<std::pair<int, int>>& kv_coords,
                         int max_delta) {
  const int lq = static_cast<int>(q_coords.size());
  const int lkv = static_cast<int>(kv_coords.size());
  if (q_head.dim(0) != lq) {
    throw ArgumentError("relative_bias: query rows do not match coordinates");
  }
  if (max_delta < 0 || rpe_time_head.dim(0) != 2 * max_delta + 1 ||
      rpe_freq_head.dim(0) != 2 * max_delta + 1) {
    throw ConfigError("relative_bias: table extent does not match max_delta");
  }
  auto clamp_idx = [max_delta](int delta) {
    return std::clamp(delta, -max_delta, max_delta) + max_delta;
  };
  std::vector<int> idx_t(static_cast<size_t>(lq) * lkv);
  std::vector<int> idx_f(static_cast<size_t>(lq) * lkv);
  for (int i = 0; i < lq; ++i) {
    for (int j = 0; j < lkv; ++j) {
      idx_t[static_cast<size_t>(i) * lkv + j] =
          clamp_idx(q_coords[i].first - kv_coords[j].first);
      idx_f[static_cast<size_t>(i) * lkv + j] =
          clamp_idx(q_coords[i].second - kv_coords[j].second);
    }
  }
  // Q R^T once per table, then pair-indexed selection.
  auto qt = matmul(q_head, transpose(rpe_time_head));
  auto qf = matmul(q_head, transpose(rpe_freq_head));
  return add(take_along_lastdim(qt, idx_t, lkv),
             take_along_lastdim(qf, idx_f, lkv));
}

template <class S>
PatchGridT<S> mhpa(const PatchGridT<S>& x, const MhpaParamsT<S>& p,
                   bool first_block_of_stage) {
  const int d_model = x.tokens.dim(1);
  if (p.heads < 1 || d_model % p.heads != 0) {
    throw ConfigError("mhpa: heads " + std::to_string(p.heads) +
                      " do not divide embedding dim " +
                      std::to_string(d_model));
  }
  if (p.pool_k.stride_t != p.pool_v.stride_t ||
      p.pool_k.stride_f != p.pool_v.stride_f) {
    throw ConfigError("mhpa: K and V pooling strides must match");
  }
  if (!first_block_of_stage && p.pool_q.pools()) {
    throw ConfigError(
        "mhpa: Q may pool with stride > 1 only at the first block of a "
        "stage");
  }
  const int d_head = d_model / p.heads;

  auto xq = add_rowvec(matmul(x.tokens, p.w_q), p.b_q);
  auto xk = add_rowvec(matmul(x.tokens, p.w_k), p.b_k);
  auto xv = add_rowvec(matmul(x.tokens, p.w_v), p.b_v);

  auto q = pool_tokens(xq, x, p.pool_q_w, p.pool_q);
  auto k = pool_tokens(xk, x, p.pool_k_w, p.pool_k);
  auto v = pool_tokens(xv, x, p.pool_v_w, p.pool_v);
  if (k.kept != v.kept || k.grid_t != v.grid_t || k.grid_f != v.grid_f) {
    throw ConfigError("mhpa: K and V pooling produced different geometries");
  }

  const bool use_rpe = p.rpe_time.defined() && p.rpe_freq.defined();
  std::vector<std::pair<int, int>> cq, ckv;
  if (use_rpe) {
    cq = grid_coords(q.grid_f, q.kept, q.stride_t, q.stride_f);
    ckv = grid_coords(k.grid_f, k.kept, k.stride_t, k.stride_f);
  }

  const S inv_sqrt_d = static_cast<S>(1.0 / std::sqrt(d_head));
  std::vector<TensorT<S>> heads;
  heads.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    const int c0 = h * d_head, c1 = (h + 1) * d_head;
    auto qh = slice_cols(q.tokens, c0, c1);
    auto kh = slice_cols(k.tokens, c0, c1);
    auto vh = slice_cols(v.tokens, c0, c1);
    auto scores = matmul(qh, transpose(kh));
    if (use_rpe) {
      scores = add(scores,
                   relative_bias(qh, slice_cols(p.rpe_time, c0, c1),
                                 slice_cols(p.rpe_freq, c0, c1), cq, ckv,
                                 p.max_delta));
    }
    auto attn = softmax_lastdim(scale(scores, inv_sqrt_d));
    heads.push_back(add(matmul(attn, vh), qh));
  }
  auto z = p.heads == 1 ? heads[0] : concat_cols(heads);

  PatchGridT<S> out = q;
  out.tokens = add_rowvec(matmul(z, p.w_o), p.b_o);
  return out;
}

template <class S>
PatchGridT<S> transformer_block(const PatchGridT<S>& x,
                                const BlockParamsT<S>& p,
                                bool first_block_of_stage) {
  auto normed = layer_norm(x.tokens, p.ln1_g, p.ln1_b, 1e-5);
  PatchGridT<S> nx = x;
  nx.tokens = normed;
  auto attn_out = mhpa(nx, p.attn, first_block_of_stage);

  // Attention skip: the raw input pooled with the Q pooling operator.
  auto skip = pool_tokens(x.tokens, x, p.attn.pool_q_w, p.attn.pool_q);
  if (skip.kept != attn_out.kept) {
    throw NumericError("transformer_block: skip/attention geometry diverged");
  }
  PatchGridT<S> mid = attn_out;
  mid.tokens = add(skip.tokens, attn_out.tokens);

  auto normed2 = layer_norm(mid.tokens, p.ln2_g, p.ln2_b, 1e-5);
  auto hidden = gelu(add_rowvec(matmul(normed2, p.mlp_w1), p.mlp_b1));
  auto mlp_out = add_rowvec(matmul(hidden, p.mlp_w2), p.mlp_b2);

  TensorT<S> res = p.expands()
                       ? add_rowvec(matmul(mid.tokens, p.res_w), p.res_b)
                       : mid.tokens;
  PatchGridT<S> out = mid;
  out.tokens = add(res, mlp_out);
  return out;
}

#define MAST_INSTANTIATE_ATTN(S)                                           \
  template PatchGridT<S> pool_tokens(const TensorT<S>&,                    \
                                     const PatchGridT<S>&,                 \
                                     const TensorT<S>&, const PoolSpec&);  \
  template TensorT<S> relative_bias(                                       \
      const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,             \
      const std::vector<std::pair<int, int>>&,                             \
      const std::vector<std::pair<int, int>>&, int);                       \
  template PatchGridT<S> mhpa(const PatchGridT<S>&, const MhpaParamsT<S>&, \
                              bool);                                       \
  template PatchGridT<S> transformer_block(const PatchGridT<S>&,           \
                                           const BlockParamsT<S>&, bool);

MAST_INSTANTIATE_ATTN(float)
MAST_INSTANTIATE_ATTN(double)

#undef MAST_INSTANTIATE_ATTN

}  // namespace mast
