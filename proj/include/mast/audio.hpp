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

#ifndef MAST_AUDIO_HPP_
#define MAST_AUDIO_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mast/common.hpp"

namespace mast {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 0;
};

// PCM 16-bit mono RIFF/WAVE only.
Waveform decode_wav(std::span<const uint8_t> bytes);
Waveform read_wav(const std::string& path);
std::vector<uint8_t> encode_wav(const Waveform& w);

// Log-scaled mel spectrogram, [t][f] row-major.
struct Spectrogram {
  std::vector<float> frames;
  int t = 0;
  int f = 0;
  double frame_hop_s = 0.01;

  float at(int ti, int fi) const {
    return frames[static_cast<size_t>(ti) * f + fi];
  }
  float& at(int ti, int fi) {
    return frames[static_cast<size_t>(ti) * f + fi];
  }
};

struct MelConfig {
  double window_s = 0.025;  // Hann
  double hop_s = 0.010;
  int mel_bins = 64;  // 128 for the full-scale preset
  double fmin = 0.0;
  double fmax = 0.0;  // 0 -> sample_rate / 2
};

// frame count = 1 + floor((len - win) / hop); log(mel_power + 1e-6).
Spectrogram log_mel(const Waveform& w, const MelConfig& cfg = {});

// Triangular filters, [mel_bins][n_fft/2 + 1]. Exposed for tests that locate
// the expected peak bin of a pure tone.
std::vector<std::vector<float>> mel_filterbank(int mel_bins, int n_fft,
                                               int sample_rate, double fmin,
                                               double fmax);

int next_pow2(int v);

}  // namespace mast

#endif  // MAST_AUDIO_HPP_
