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

#include "mast/model.hpp"

#include <cmath>

namespace mast {

namespace {

constexpr int kPoolKernel = 3;  // overlapping 3x3 pooling kernels, padding 1
constexpr int kPoolPad = 1;
constexpr double kInitSigma = 0.02;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::string block_prefix(int stage, int block) {
  return "s" + std::to_string(stage) + "/b" + std::to_string(block) + "/";
}

PoolSpec make_pool(int stride_t, int stride_f) {
  PoolSpec p;
  p.kernel_t = kPoolKernel;
  p.kernel_f = kPoolKernel;
  p.stride_t = stride_t;
  p.stride_f = stride_f;
  p.pad_t = kPoolPad;
  p.pad_f = kPoolPad;
  return p;
}

// Whether stage i's last block doubles the dim into stage i+1.
bool stage_expands(const ModelConfig& cfg, size_t i) {
  return i + 1 < cfg.stages.size() &&
         cfg.stages[i + 1].dim == 2 * cfg.stages[i].dim;
}

int rpe_rows(const ModelConfig& cfg) {
  const int gt = ceil_div(cfg.frames, cfg.patch_t);
  const int gf = ceil_div(cfg.mel_bins, cfg.patch_f);
  const int max_delta = std::max(gt, gf) - 1;
  return 2 * max_delta + 1;
}

}  // namespace

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.mel_bins = 64;
  cfg.frames = 64;
  cfg.patch_t = 4;
  cfg.patch_f = 4;
  cfg.stem_dim = 32;
  cfg.num_classes = 10;
  cfg.rpe_enabled = true;
  const int depths[4] = {1, 2, 11, 2};
  const int dims[4] = {32, 64, 128, 256};
  const int heads[4] = {1, 2, 4, 8};
  const int kv_strides[4] = {4, 2, 1, 1};
  for (int i = 0; i < 4; ++i) {
    StageConfig s;
    s.depth = depths[i];
    s.dim = dims[i];
    s.heads = heads[i];
    s.pool_q_stride_t = s.pool_q_stride_f = (i == 0) ? 1 : 2;
    s.pool_kv_stride_t = s.pool_kv_stride_f = kv_strides[i];
    cfg.stages.push_back(s);
  }
  return cfg;
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.mel_bins < 1 || cfg.frames < 1 || cfg.patch_t < 1 ||
      cfg.patch_f < 1) {
    throw ConfigError("model config: spectrogram/patch extents must be >= 1");
  }
  if (cfg.patch_t > cfg.frames || cfg.patch_f > cfg.mel_bins) {
    throw ConfigError("model config: patch larger than the spectrogram");
  }
  if (cfg.num_classes < 1) {
    throw ConfigError("model config: num_classes must be >= 1");
  }
  if (cfg.stages.empty()) {
    throw ConfigError("model config: at least one stage required");
  }
  if (cfg.stages.front().dim != cfg.stem_dim) {
    throw ConfigError("model config: stage 0 dim must equal stem dim");
  }
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& s = cfg.stages[i];
    const std::string where = "stage " + std::to_string(i);
    if (s.depth < 1) throw ConfigError(where + ": depth must be >= 1");
    if (s.dim < 1 || s.heads < 1 || s.dim % s.heads != 0) {
      throw ConfigError(where + ": dim must be divisible by heads");
    }
    if (s.pool_q_stride_t < 1 || s.pool_q_stride_f < 1 ||
        s.pool_kv_stride_t < 1 || s.pool_kv_stride_f < 1) {
      throw ConfigError(where + ": strides must be >= 1");
    }
    if (i == 0 && (s.pool_q_stride_t > 1 || s.pool_q_stride_f > 1)) {
      throw ConfigError("stage 0 cannot pool queries");
    }
    if (i > 0) {
      const int prev = cfg.stages[i - 1].dim;
      if (s.dim != prev && s.dim != 2 * prev) {
        throw ConfigError(where + ": dim must equal or double stage " +
                          std::to_string(i - 1) + " dim");
      }
    }
  }
  shape_plan(cfg);  // surfaces degenerate grids with the stage index
}

ShapePlan shape_plan(const ModelConfig& cfg) {
  ShapePlan plan;
  plan.input_grid_t = ceil_div(cfg.frames, cfg.patch_t);
  plan.input_grid_f = ceil_div(cfg.mel_bins, cfg.patch_f);
  plan.input_tokens = plan.input_grid_t * plan.input_grid_f;
  int t = plan.input_grid_t;
  int f = plan.input_grid_f;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& s = cfg.stages[i];
    StageShape st;
    st.dim = s.dim;
    const int in_t = t, in_f = f;
    try {
      t = pooled_len(t, kPoolKernel, s.pool_q_stride_t, kPoolPad);
      f = pooled_len(f, kPoolKernel, s.pool_q_stride_f, kPoolPad);
      st.grid_t = t;
      st.grid_f = f;
      st.tokens = t * f;
      for (int b = 0; b < s.depth; ++b) {
        BlockShape bs;
        bs.lq = t * f;
        const int kt = b == 0 ? in_t : t;
        const int kf = b == 0 ? in_f : f;
        bs.lkv = pooled_len(kt, kPoolKernel, s.pool_kv_stride_t, kPoolPad) *
                 pooled_len(kf, kPoolKernel, s.pool_kv_stride_f, kPoolPad);
        st.blocks.push_back(bs);
      }
    } catch (const ArgumentError& e) {
      throw ConfigError("stage " + std::to_string(i) +
                        ": degenerate grid: " + e.what());
    }
    plan.stages.push_back(std::move(st));
  }
  plan.final_tokens = t * f;
  plan.final_dim = cfg.stages.back().dim;
  return plan;
}

// ---------------------------------------------------------------------------
// Parameter tree

template <class S>
void ParamsT<S>::add(const std::string& name, TensorT<S> t) {
  if (by_name_.count(name)) {
    throw StateError("duplicate parameter name: " + name);
  }
  by_name_[name] = items_.size();
  by_node_[t.node()] = items_.size();
  items_.emplace_back(name, std::move(t));
}

template <class S>
bool ParamsT<S>::has(const std::string& name) const {
  return by_name_.count(name) != 0;
}

template <class S>
TensorT<S>& ParamsT<S>::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw StateError("missing parameter: " + name);
  return items_[it->second].second;
}

template <class S>
const TensorT<S>& ParamsT<S>::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw StateError("missing parameter: " + name);
  return items_[it->second].second;
}

template <class S>
int64_t ParamsT<S>::total_elements() const {
  int64_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

template <class S>
void ParamsT<S>::set_requires_grad(bool v) {
  for (auto& [_, t] : items_) t.set_requires_grad(v);
}

template <class S>
void ParamsT<S>::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

template <class S>
int ParamsT<S>::index_of(const detail::Node<S>* n) const {
  auto it = by_node_.find(n);
  return it == by_node_.end() ? -1 : static_cast<int>(it->second);
}

template <class S>
ParamsT<S> clone_detached(const ParamsT<S>& src) {
  ParamsT<S> out;
  for (size_t i = 0; i < src.size(); ++i) {
    out.add(src.name(i), src.tensor(i).detach());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

template <class S>
TensorT<S> trunc_normal(Shape shape, Rng& rng) {
  std::vector<S> v(static_cast<size_t>(numel(shape)));
  for (auto& e : v) e = static_cast<S>(rng.truncated_normal(kInitSigma));
  return TensorT<S>::from_data(std::move(shape), std::move(v));
}

template <class S>
TensorT<S> center_one_kernel(int channels) {
  std::vector<S> v(static_cast<size_t>(channels) * kPoolKernel * kPoolKernel,
                   S(0));
  const int c = kPoolKernel / 2;
  for (int ch = 0; ch < channels; ++ch) {
    v[(static_cast<size_t>(ch) * kPoolKernel + c) * kPoolKernel + c] = S(1);
  }
  return TensorT<S>::from_data({channels, kPoolKernel, kPoolKernel},
                               std::move(v));
}

}  // namespace

template <class S>
ParamsT<S> init_weights(const ModelConfig& cfg, uint64_t seed) {
  validate_config(cfg);
  Rng rng(seed);
  ParamsT<S> w;
  const int pd = cfg.patch_t * cfg.patch_f;
  w.add("stem/w", trunc_normal<S>({pd, cfg.stem_dim}, rng));
  w.add("stem/b", TensorT<S>::zeros({cfg.stem_dim}));

  const int rows = rpe_rows(cfg);
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& s = cfg.stages[i];
    const int d = s.dim;
    const bool expand = stage_expands(cfg, i);
    const int d_out = expand ? 2 * d : d;
    for (int b = 0; b < s.depth; ++b) {
      const std::string p = block_prefix(static_cast<int>(i), b);
      w.add(p + "ln1/g", TensorT<S>::full({d}, S(1)));
      w.add(p + "ln1/b", TensorT<S>::zeros({d}));
      w.add(p + "attn/wq", trunc_normal<S>({d, d}, rng));
      w.add(p + "attn/bq", TensorT<S>::zeros({d}));
      w.add(p + "attn/wk", trunc_normal<S>({d, d}, rng));
      w.add(p + "attn/bk", TensorT<S>::zeros({d}));
      w.add(p + "attn/wv", trunc_normal<S>({d, d}, rng));
      w.add(p + "attn/bv", TensorT<S>::zeros({d}));
      w.add(p + "attn/wo", trunc_normal<S>({d, d}, rng));
      w.add(p + "attn/bo", TensorT<S>::zeros({d}));
      w.add(p + "attn/poolq/w", center_one_kernel<S>(d));
      w.add(p + "attn/poolk/w", center_one_kernel<S>(d));
      w.add(p + "attn/poolv/w", center_one_kernel<S>(d));
      if (cfg.rpe_enabled) {
        w.add(p + "attn/rpe_t", TensorT<S>::zeros({rows, d}));
        w.add(p + "attn/rpe_f", TensorT<S>::zeros({rows, d}));
      }
      w.add(p + "ln2/g", TensorT<S>::full({d}, S(1)));
      w.add(p + "ln2/b", TensorT<S>::zeros({d}));
      const bool last = b == s.depth - 1;
      const int mlp_out = last ? d_out : d;
      w.add(p + "mlp/w1", trunc_normal<S>({d, 4 * d}, rng));
      w.add(p + "mlp/b1", TensorT<S>::zeros({4 * d}));
      w.add(p + "mlp/w2", trunc_normal<S>({4 * d, mlp_out}, rng));
      w.add(p + "mlp/b2", TensorT<S>::zeros({mlp_out}));
      if (last && expand) {
        w.add(p + "res/w", trunc_normal<S>({d, d_out}, rng));
        w.add(p + "res/b", TensorT<S>::zeros({d_out}));
      }
    }
  }
  const int fd = cfg.stages.back().dim;
  w.add("head/ln/g", TensorT<S>::full({fd}, S(1)));
  w.add("head/ln/b", TensorT<S>::zeros({fd}));
  w.add("head/w", trunc_normal<S>({fd, cfg.num_classes}, rng));
  w.add("head/b", TensorT<S>::zeros({cfg.num_classes}));
  w.set_requires_grad(true);
  return w;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <class S>
BlockParamsT<S> block_params(const ModelConfig& cfg, const ParamsT<S>& w,
                             size_t stage, int block) {
  const auto& s = cfg.stages[stage];
  const std::string p = block_prefix(static_cast<int>(stage), block);
  BlockParamsT<S> bp;
  bp.ln1_g = w.get(p + "ln1/g");
  bp.ln1_b = w.get(p + "ln1/b");
  bp.ln2_g = w.get(p + "ln2/g");
  bp.ln2_b = w.get(p + "ln2/b");
  auto& a = bp.attn;
  a.w_q = w.get(p + "attn/wq");
  a.b_q = w.get(p + "attn/bq");
  a.w_k = w.get(p + "attn/wk");
  a.b_k = w.get(p + "attn/bk");
  a.w_v = w.get(p + "attn/wv");
  a.b_v = w.get(p + "attn/bv");
  a.w_o = w.get(p + "attn/wo");
  a.b_o = w.get(p + "attn/bo");
  a.pool_q_w = w.get(p + "attn/poolq/w");
  a.pool_k_w = w.get(p + "attn/poolk/w");
  a.pool_v_w = w.get(p + "attn/poolv/w");
  a.pool_q = block == 0 ? make_pool(s.pool_q_stride_t, s.pool_q_stride_f)
                        : make_pool(1, 1);
  a.pool_k = make_pool(s.pool_kv_stride_t, s.pool_kv_stride_f);
  a.pool_v = a.pool_k;
  a.heads = s.heads;
  if (cfg.rpe_enabled) {
    a.rpe_time = w.get(p + "attn/rpe_t");
    a.rpe_freq = w.get(p + "attn/rpe_f");
    a.max_delta = (a.rpe_time.dim(0) - 1) / 2;
  }
  bp.mlp_w1 = w.get(p + "mlp/w1");
  bp.mlp_b1 = w.get(p + "mlp/b1");
  bp.mlp_w2 = w.get(p + "mlp/w2");
  bp.mlp_b2 = w.get(p + "mlp/b2");
  if (w.has(p + "res/w")) {
    bp.res_w = w.get(p + "res/w");
    bp.res_b = w.get(p + "res/b");
  }
  return bp;
}

template <class S>
void check_block_finite(const TensorT<S>& t, size_t stage, int block) {
  for (S v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite activation at stage " +
                         std::to_string(stage) + " block " +
                         std::to_string(block));
    }
  }
}

}  // namespace

template <class S>
PatchGridT<S> forward_features(const ModelConfig& cfg, const ParamsT<S>& w,
                               const PatchGridT<S>& x) {
  if (x.tokens.dim(1) != cfg.stem_dim) {
    throw ArgumentError("forward_features: token dim " +
                        std::to_string(x.tokens.dim(1)) +
                        " does not match stem dim " +
                        std::to_string(cfg.stem_dim));
  }
  PatchGridT<S> cur = x;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    for (int b = 0; b < cfg.stages[i].depth; ++b) {
      cur = transformer_block(cur, block_params(cfg, w, i, b), b == 0);
      check_block_finite(cur.tokens, i, b);
    }
  }
  return cur;
}

template <class S>
TensorT<S> classify(const ModelConfig& cfg, const ParamsT<S>& w,
                    const PatchGridT<S>& features) {
  (void)cfg;
  auto pooled = mean_pool_rows(features.tokens);
  auto normed =
      layer_norm(pooled, w.get("head/ln/g"), w.get("head/ln/b"), 1e-5);
  return add_rowvec(matmul(normed, w.get("head/w")), w.get("head/b"));
}

template <class S>
PatchGridT<S> embed_spectrogram(const ModelConfig& cfg, const ParamsT<S>& w,
                                const Spectrogram& s) {
  if (s.f != cfg.mel_bins) {
    throw DataError("spectrogram has " + std::to_string(s.f) +
                    " mel bins, model expects " +
                    std::to_string(cfg.mel_bins));
  }
  return patchify(s, cfg.patch_t, cfg.patch_f, w.get("stem/w"),
                  w.get("stem/b"));
}

ParamsT<double> params_to_double(const Params& src) {
  ParamsT<double> out;
  for (size_t i = 0; i < src.size(); ++i) {
    const auto& t = src.tensor(i);
    std::vector<double> v(t.data().begin(), t.data().end());
    out.add(src.name(i),
            TensorT<double>::from_data(t.shape(), std::move(v)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_params(const std::string& path, const Params& params,
                 const std::string& prefix) {
  save_params_multi(path, {{prefix, &params}});
}

void save_params_multi(
    const std::string& path,
    const std::vector<std::pair<std::string, const Params*>>& trees) {
  std::vector<NamedTensor> entries;
  for (const auto& [prefix, params] : trees) {
    for (size_t i = 0; i < params->size(); ++i) {
      const auto& t = params->tensor(i);
      NamedTensor e;
      e.name = prefix + params->name(i);
      e.shape = t.shape();
      e.data.assign(t.data().begin(), t.data().end());
      entries.push_back(std::move(e));
    }
  }
  write_checkpoint(path, entries);
}

void load_params(const std::string& path, Params& params,
                 const std::string& prefix, bool allow_extra) {
  const auto entries = read_checkpoint(path);
  size_t applied = 0;
  for (const auto& e : entries) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    const std::string name = e.name.substr(prefix.size());
    if (!params.has(name)) {
      if (allow_extra) continue;
      throw StateError("checkpoint " + path + ": unexpected entry '" +
                       e.name + "'");
    }
    auto& t = params.get(name);
    if (t.shape() != e.shape) {
      throw StateError("checkpoint " + path + ": entry '" + e.name +
                       "' has shape " + shape_str(e.shape) + ", expected " +
                       shape_str(t.shape()));
    }
    std::copy(e.data.begin(), e.data.end(), t.data_mut().begin());
    ++applied;
  }
  if (applied != params.size()) {
    throw StateError("checkpoint " + path + ": covers " +
                     std::to_string(applied) + " of " +
                     std::to_string(params.size()) +
                     " parameters with prefix '" + prefix + "'");
  }
}

// ---------------------------------------------------------------------------

template class ParamsT<float>;
template class ParamsT<double>;
template ParamsT<float> clone_detached(const ParamsT<float>&);
template ParamsT<double> clone_detached(const ParamsT<double>&);
template ParamsT<float> init_weights(const ModelConfig&, uint64_t);
template ParamsT<double> init_weights(const ModelConfig&, uint64_t);
template PatchGridT<float> forward_features(const ModelConfig&,
                                            const ParamsT<float>&,
                                            const PatchGridT<float>&);
template PatchGridT<double> forward_features(const ModelConfig&,
                                             const ParamsT<double>&,
                                             const PatchGridT<double>&);
template TensorT<float> classify(const ModelConfig&, const ParamsT<float>&,
                                 const PatchGridT<float>&);
template TensorT<double> classify(const ModelConfig&, const ParamsT<double>&,
                                  const PatchGridT<double>&);
template PatchGridT<float> embed_spectrogram(const ModelConfig&,
                                             const ParamsT<float>&,
                                             const Spectrogram&);
template PatchGridT<double> embed_spectrogram(const ModelConfig&,
                                              const ParamsT<double>&,
                                              const Spectrogram&);

}  // namespace mast
