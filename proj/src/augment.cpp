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

#include "mast/augment.hpp"

#include <algorithm>
#include <cmath>

namespace mast {

Spectrogram resized_crop(const Spectrogram& s, int t0, int f0, int ct,
                         int cf) {
  if (ct <= 0 || cf <= 0 || t0 < 0 || f0 < 0 || t0 + ct > s.t ||
      f0 + cf > s.f) {
    throw ArgumentError("resized_crop: crop outside spectrogram");
  }
  Spectrogram out;
  out.t = s.t;
  out.f = s.f;
  out.frame_hop_s = s.frame_hop_s;
  out.frames.resize(s.frames.size());
  const double st = static_cast<double>(ct) / s.t;
  const double sf = static_cast<double>(cf) / s.f;
  for (int ti = 0; ti < s.t; ++ti) {
    const double src_t = (ti + 0.5) * st - 0.5;
    const double tc = std::min(std::max(src_t, 0.0),
                               static_cast<double>(ct - 1));
    const int t_lo = static_cast<int>(tc);
    const int t_hi = std::min(t_lo + 1, ct - 1);
    const double wt = tc - t_lo;
    for (int fi = 0; fi < s.f; ++fi) {
      const double src_f = (fi + 0.5) * sf - 0.5;
      const double fc = std::min(std::max(src_f, 0.0),
                                 static_cast<double>(cf - 1));
      const int f_lo = static_cast<int>(fc);
      const int f_hi = std::min(f_lo + 1, cf - 1);
      const double wf = fc - f_lo;
      const double v =
          (1.0 - wt) * ((1.0 - wf) * s.at(t0 + t_lo, f0 + f_lo) +
                        wf * s.at(t0 + t_lo, f0 + f_hi)) +
          wt * ((1.0 - wf) * s.at(t0 + t_hi, f0 + f_lo) +
                wf * s.at(t0 + t_hi, f0 + f_hi));
      out.at(ti, fi) = static_cast<float>(v);
    }
  }
  return out;
}

Spectrogram random_resized_crop(const Spectrogram& s, Rng& rng,
                                const RrcParams& p) {
  const double area = static_cast<double>(s.t) * s.f;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(p.scale_lo, p.scale_hi);
    const double ratio =
        std::exp(rng.uniform(std::log(p.ratio_lo), std::log(p.ratio_hi)));
    const int cf = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int ct = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (ct < 1 || cf < 1 || ct > s.t || cf > s.f) continue;
    const int t0 = rng.uniform_int(0, s.t - ct);
    const int f0 = rng.uniform_int(0, s.f - cf);
    return resized_crop(s, t0, f0, ct, cf);
  }
  return resized_crop(s, 0, 0, s.t, s.f);
}

Spectrogram mixup(const Spectrogram& a, const Spectrogram& b, float lambda) {
  if (a.t != b.t || a.f != b.f) {
    throw ArgumentError("mixup: shape mismatch " + std::to_string(a.t) + "x" +
                        std::to_string(a.f) + " vs " + std::to_string(b.t) +
                        "x" + std::to_string(b.f));
  }
  if (lambda < 0.0f || lambda > 1.0f) {
    throw ArgumentError("mixup: lambda " + std::to_string(lambda) +
                        " outside [0, 1]");
  }
  Spectrogram out = a;
  for (size_t i = 0; i < out.frames.size(); ++i) {
    out.frames[i] = lambda * a.frames[i] + (1.0f - lambda) * b.frames[i];
  }
  return out;
}

}  // namespace mast
