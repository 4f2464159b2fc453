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

#include "mast/synth.hpp"

#include <algorithm>

#include "mast/rng.hpp"

namespace mast {

LabeledSpec gen_synthetic_sample(const SynthSpec& spec, int index) {
  Rng root(spec.seed);
  Rng rng = root.split(static_cast<uint64_t>(index));
  const int label = index % spec.classes;
  const int T = spec.duration_frames;
  const int F = spec.mel_bins;

  LabeledSpec out;
  out.label = label;
  out.spec.t = T;
  out.spec.f = F;
  out.spec.frames.assign(static_cast<size_t>(T) * F, 0.0f);

  const int base = 4 + 5 * label;
  const int bins[3] = {std::min(base, F - 1), std::min(2 * base, F - 1),
                       std::min(3 * base, F - 1)};
  const int shift = rng.uniform_int(-spec.max_shift, spec.max_shift);
  for (int t = 0; t < T; ++t) {
    const int src = t - shift;
    if (src < 0 || src >= T) continue;  // pattern shifted past the edge
    for (int b : bins) out.spec.at(t, b) = 1.0f;
  }
  if (spec.noise_sigma > 0.0f) {
    for (auto& v : out.spec.frames) {
      v += spec.noise_sigma * static_cast<float>(rng.normal());
    }
  }
  return out;
}

std::vector<LabeledSpec> gen_synthetic(const SynthSpec& spec, int count) {
  std::vector<LabeledSpec> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    out.push_back(gen_synthetic_sample(spec, i));
  }
  return out;
}

}  // namespace mast
