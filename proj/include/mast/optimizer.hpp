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

#ifndef MAST_OPTIMIZER_HPP_
#define MAST_OPTIMIZER_HPP_

#include <vector>

#include "mast/model.hpp"

namespace mast {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled

  bool operator==(const AdamConfig&) const = default;
};

// Adam with bias correction and decoupled weight decay. Reads .grad off the
// parameter tensors; the training loop owns zeroing them.
class AdamW {
 public:
  AdamW(const Params& params, AdamConfig cfg);

  void step(Params& params, double lr_now);
  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

// Cosine decay from `base` to 0 over `total` steps; step counts from 0.
double cosine_lr(double base, int64_t step, int64_t total);

// Leaf-gradient map produced by backward_seeded during parallel batch walks.
using GradSink =
    std::unordered_map<const detail::Node<float>*, std::vector<float>>;

// Fixed chunking for deterministic parallel gradient accumulation: chunk c
// covers samples [c*kGradChunk, (c+1)*kGradChunk). Each chunk accumulates
// its samples in order into a chunk-local sink; sinks merge into the
// parameters' .grad in chunk order, so results are bitwise independent of
// the worker count.
constexpr int kGradChunk = 4;

void merge_grad_sinks(Params& params, const std::vector<GradSink>& sinks);

}  // namespace mast

#endif  // MAST_OPTIMIZER_HPP_
