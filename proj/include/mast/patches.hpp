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

#ifndef MAST_PATCHES_HPP_
#define MAST_PATCHES_HPP_

#include <vector>

#include "mast/audio.hpp"
#include "mast/rng.hpp"
#include "mast/tensor.hpp"

namespace mast {

// Token sequence carrying its 2-D (time, freq) grid. `kept` lists surviving
// grid positions (ascending; identity when nothing was dropped), so relative
// positions survive patch-drop and pooling. stride_t/f is the cumulative
// pooling stride of this grid relative to the input patch grid.
template <class S>
struct PatchGridT {
  TensorT<S> tokens;  // [|kept|, D]
  int grid_t = 0;
  int grid_f = 0;
  std::vector<int> kept;
  int patch_t = 1;
  int patch_f = 1;
  int stride_t = 1;
  int stride_f = 1;

  int count() const { return static_cast<int>(kept.size()); }
  bool full() const {
    return static_cast<int64_t>(kept.size()) ==
           static_cast<int64_t>(grid_t) * grid_f;
  }
};

using PatchGrid = PatchGridT<float>;

// Identity kept list 0..n-1.
std::vector<int> full_kept(int n);

// Cuts the spectrogram into patch_t x patch_f patches (edge-replicating the
// last rows/columns when extents do not divide) and projects each flattened
// patch with embed_w [patch_t*patch_f, D] (+ embed_b [D]). Token order is
// row-major over the (time, freq) patch grid; within a patch values are
// row-major as well. The double instantiation backs the gradient oracle's
// 64-bit replica of the full pipeline.
template <class S>
PatchGridT<S> patchify(const Spectrogram& s, int patch_t, int patch_f,
                       const TensorT<S>& embed_w, const TensorT<S>& embed_b);

// Keeps exactly count - round(j * count) tokens, sampled uniformly without
// replacement; grid extents and coordinates of survivors are unchanged.
template <class S>
PatchGridT<S> patch_drop(const PatchGridT<S>& g, double j, Rng& rng);

}  // namespace mast

#endif  // MAST_PATCHES_HPP_
