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

#ifndef MAST_MODEL_HPP_
#define MAST_MODEL_HPP_

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mast/attention.hpp"
#include "mast/io.hpp"
#include "mast/patches.hpp"
#include "mast/rng.hpp"
#include "mast/tensor.hpp"

namespace mast {

struct StageConfig {
  int depth = 1;
  int dim = 32;
  int heads = 1;
  int pool_q_stride_t = 1, pool_q_stride_f = 1;    // first block only
  int pool_kv_stride_t = 1, pool_kv_stride_f = 1;  // every block of the stage
};

struct ModelConfig {
  int mel_bins = 64;
  int frames = 64;
  int patch_t = 4, patch_f = 4;
  int stem_dim = 32;
  std::vector<StageConfig> stages;
  int num_classes = 10;
  bool rpe_enabled = true;
};

// 64x64 input, 4x4 patches, stem dim 32, depths (1,2,11,2), dims doubling
// per stage, heads (1,2,4,8), Q strides (1,2,2,2), K/V strides (4,2,1,1).
ModelConfig desk_config();

void validate_config(const ModelConfig& cfg);

// Pure shape arithmetic; no weights.
struct BlockShape {
  int lq = 0;
  int lkv = 0;
};
struct StageShape {
  int tokens = 0;
  int grid_t = 0, grid_f = 0;
  int dim = 0;
  std::vector<BlockShape> blocks;
};
struct ShapePlan {
  int input_tokens = 0;
  int input_grid_t = 0, input_grid_f = 0;
  std::vector<StageShape> stages;
  int final_tokens = 0;
  int final_dim = 0;
};
ShapePlan shape_plan(const ModelConfig& cfg);

// Ordered, name-addressed parameter tree.
template <class S>
class ParamsT {
 public:
  void add(const std::string& name, TensorT<S> t);
  bool has(const std::string& name) const;
  TensorT<S>& get(const std::string& name);
  const TensorT<S>& get(const std::string& name) const;
  size_t size() const { return items_.size(); }
  const std::string& name(size_t i) const { return items_[i].first; }
  TensorT<S>& tensor(size_t i) { return items_[i].second; }
  const TensorT<S>& tensor(size_t i) const { return items_[i].second; }
  int64_t total_elements() const;
  void set_requires_grad(bool v);
  void zero_grad();
  // Index of the parameter owning this node, or -1.
  int index_of(const detail::Node<S>* n) const;

 private:
  std::vector<std::pair<std::string, TensorT<S>>> items_;
  std::unordered_map<std::string, size_t> by_name_;
  std::unordered_map<const detail::Node<S>*, size_t> by_node_;
};

using Params = ParamsT<float>;

// Detached value copy (no graph, no grad requirement) of the whole tree.
template <class S>
ParamsT<S> clone_detached(const ParamsT<S>& src);

// Truncated-normal (sigma 0.02, clipped at 2 sigma) projections, zero biases
// and RPE tables, center-one pooling kernels, unit LayerNorm gains. All
// tensors require grad. Deterministic per seed.
template <class S>
ParamsT<S> init_weights(const ModelConfig& cfg, uint64_t seed);

// Stage pyramid over a patchified (and possibly patch-dropped) token grid.
// Throws NumericError naming the stage/block if activations go non-finite.
template <class S>
PatchGridT<S> forward_features(const ModelConfig& cfg, const ParamsT<S>& w,
                               const PatchGridT<S>& x);

// mean-pool tokens -> layer norm -> linear head.
template <class S>
TensorT<S> classify(const ModelConfig& cfg, const ParamsT<S>& w,
                    const PatchGridT<S>& features);

// Convenience: patchify with the stem parameters in `w`.
template <class S>
PatchGridT<S> embed_spectrogram(const ModelConfig& cfg, const ParamsT<S>& w,
                                const Spectrogram& s);

// Value-preserving precision cast of the whole tree (grads not carried).
ParamsT<double> params_to_double(const Params& src);

// Checkpoint round-trip. `prefix` is prepended to names on save and
// stripped on load; entries without it are skipped. The tree must be fully
// covered or load fails with StateError; matching entries that name no
// parameter fail too unless allow_extra.
void save_params(const std::string& path, const Params& params,
                 const std::string& prefix = "");
void save_params_multi(
    const std::string& path,
    const std::vector<std::pair<std::string, const Params*>>& trees);
void load_params(const std::string& path, Params& params,
                 const std::string& prefix = "", bool allow_extra = false);

}  // namespace mast

#endif  // MAST_MODEL_HPP_
