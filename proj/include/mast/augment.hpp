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

#ifndef MAST_AUGMENT_HPP_
#define MAST_AUGMENT_HPP_

#include "mast/audio.hpp"
#include "mast/rng.hpp"

namespace mast {

struct RrcParams {
  double scale_lo = 0.6;   // fraction of area
  double scale_hi = 1.0;
  double ratio_lo = 0.75;  // crop aspect jitter, freq/time
  double ratio_hi = 4.0 / 3.0;
};

// Crop [t0, t0+ct) x [f0, f0+cf) and bilinear-resize back to the input
// extents (half-pixel centers, edges clamped). A full-extent crop is an
// exact identity.
Spectrogram resized_crop(const Spectrogram& s, int t0, int f0, int ct,
                         int cf);

// Area scale and log-uniform aspect jitter, ten placement attempts, then a
// full-frame fallback.
Spectrogram random_resized_crop(const Spectrogram& s, Rng& rng,
                                const RrcParams& p = {});

// lambda * a + (1 - lambda) * b, elementwise.
Spectrogram mixup(const Spectrogram& a, const Spectrogram& b, float lambda);

}  // namespace mast

#endif  // MAST_AUGMENT_HPP_
