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

#ifndef MAST_SYNTH_HPP_
#define MAST_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "mast/audio.hpp"

namespace mast {

// Deterministic 10-class toy corpus: class c paints a harmonic stack at mel
// bins {b, 2b, 3b} with b = 4 + 5c (clamped to the top bin), shifted in time
// by a class-independent offset of up to +/- max_shift frames, plus white
// noise. Sample i depends only on (seed, i), so prefixes of a run are stable.
struct SynthSpec {
  int classes = 10;
  int duration_frames = 64;
  int mel_bins = 64;
  uint64_t seed = 0;
  float noise_sigma = 0.3f;
  int max_shift = 4;
};

struct LabeledSpec {
  Spectrogram spec;
  int label = 0;
};

LabeledSpec gen_synthetic_sample(const SynthSpec& spec, int index);
std::vector<LabeledSpec> gen_synthetic(const SynthSpec& spec, int count);

}  // namespace mast

#endif  // MAST_SYNTH_HPP_
