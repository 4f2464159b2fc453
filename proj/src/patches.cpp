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

#include "mast/patches.hpp"

#include <cmath>
#include <numeric>

namespace mast {

std::vector<int> full_kept(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

template <class S>
PatchGridT<S> patchify(const Spectrogram& s, int patch_t, int patch_f,
                       const TensorT<S>& embed_w, const TensorT<S>& embed_b) {
  if (patch_t <= 0 || patch_f <= 0) {
    throw ArgumentError("patchify: patch extents must be positive");
  }
  if (s.t <= 0 || s.f <= 0) throw ArgumentError("patchify: empty spectrogram");
  if (patch_t > s.t || patch_f > s.f) {
    throw ArgumentError("patchify: patch " + std::to_string(patch_t) + "x" +
                        std::to_string(patch_f) +
                        " larger than spectrogram " + std::to_string(s.t) +
                        "x" + std::to_string(s.f));
  }
  const int gt = (s.t + patch_t - 1) / patch_t;
  const int gf = (s.f + patch_f - 1) / patch_f;
  const int pd = patch_t * patch_f;
  if (embed_w.rank() != 2 || embed_w.dim(0) != pd) {
    throw ShapeError("patchify: projection " + shape_str(embed_w.shape()) +
                     " does not accept " + std::to_string(pd) +
                     "-value patches");
  }
  // Flattened patches; reads past the edge replicate the last row/column.
  std::vector<S> pm(static_cast<size_t>(gt) * gf * pd);
  for (int a = 0; a < gt; ++a) {
    for (int b = 0; b < gf; ++b) {
      S* dst = pm.data() + (static_cast<size_t>(a) * gf + b) * pd;
      for (int i = 0; i < patch_t; ++i) {
        const int ti = std::min(a * patch_t + i, s.t - 1);
        for (int j = 0; j < patch_f; ++j) {
          const int fj = std::min(b * patch_f + j, s.f - 1);
          dst[i * patch_f + j] = static_cast<S>(s.at(ti, fj));
        }
      }
    }
  }
  PatchGridT<S> g;
  g.grid_t = gt;
  g.grid_f = gf;
  g.kept = full_kept(gt * gf);
  g.patch_t = patch_t;
  g.patch_f = patch_f;
  auto patches = TensorT<S>::from_data({gt * gf, pd}, std::move(pm));
  g.tokens = add_rowvec(matmul(patches, embed_w), embed_b);
  return g;
}

template PatchGridT<float> patchify(const Spectrogram&, int, int,
                                    const TensorT<float>&,
                                    const TensorT<float>&);
template PatchGridT<double> patchify(const Spectrogram&, int, int,
                                     const TensorT<double>&,
                                     const TensorT<double>&);

template <class S>
PatchGridT<S> patch_drop(const PatchGridT<S>& g, double j, Rng& rng) {
  if (j < 0.0 || j >= 1.0) {
    throw ArgumentError("patch_drop: fraction " + std::to_string(j) +
                        " outside [0, 1)");
  }
  const int n = g.count();
  const int keep = n - static_cast<int>(std::floor(j * n + 0.5));
  if (keep == n) return g;
  std::vector<int> sel = rng.sample_without_replacement(n, keep);
  PatchGridT<S> out = g;
  out.tokens = gather_rows(g.tokens, sel);
  out.kept.clear();
  out.kept.reserve(sel.size());
  for (int r : sel) out.kept.push_back(g.kept[r]);
  return out;
}

template PatchGridT<float> patch_drop(const PatchGridT<float>&, double, Rng&);
template PatchGridT<double> patch_drop(const PatchGridT<double>&, double,
                                       Rng&);

}  // namespace mast
