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

#include "mast/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mast {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-6;

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

}  // namespace

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

Waveform decode_wav(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("wav: not a RIFF/WAVE stream");
  }
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    const uint32_t sz = rd_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + sz > bytes.size()) {
      throw DataError(std::string("wav: chunk '") + id +
                      "' overruns file (size " + std::to_string(sz) + ")");
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw DataError("wav: fmt chunk too short");
      const uint8_t* f = bytes.data() + pos;
      format = rd_u16(f);
      channels = rd_u16(f + 2);
      sample_rate = rd_u32(f + 4);
      bits = rd_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + pos;
      data_len = sz;
    }
    pos += sz + (sz & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw DataError("wav: missing fmt chunk");
  if (format != 1) {
    throw DataError("wav: fmt chunk: expected PCM (format 1), got format " +
                    std::to_string(format));
  }
  if (channels != 1) {
    throw DataError("wav: fmt chunk: expected mono, got " +
                    std::to_string(channels) + " channels");
  }
  if (bits != 16) {
    throw DataError("wav: fmt chunk: expected 16-bit samples, got " +
                    std::to_string(bits));
  }
  if (!data_ptr) throw DataError("wav: missing data chunk");
  if (sample_rate == 0) throw DataError("wav: fmt chunk: zero sample rate");

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  const size_t n = data_len / 2;
  if (n == 0) throw DataError("wav: data chunk holds no samples");
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t s =
        static_cast<int16_t>(rd_u16(data_ptr + 2 * i));
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<uint8_t> encode_wav(const Waveform& w) {
  const uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 2);
  std::vector<uint8_t> out(44 + data_len);
  auto wr_u32 = [&](size_t off, uint32_t v) {
    out[off] = v & 0xff;
    out[off + 1] = (v >> 8) & 0xff;
    out[off + 2] = (v >> 16) & 0xff;
    out[off + 3] = (v >> 24) & 0xff;
  };
  auto wr_u16 = [&](size_t off, uint16_t v) {
    out[off] = v & 0xff;
    out[off + 1] = (v >> 8) & 0xff;
  };
  std::memcpy(out.data(), "RIFF", 4);
  wr_u32(4, 36 + data_len);
  std::memcpy(out.data() + 8, "WAVE", 4);
  std::memcpy(out.data() + 12, "fmt ", 4);
  wr_u32(16, 16);
  wr_u16(20, 1);  // PCM
  wr_u16(22, 1);  // mono
  wr_u32(24, static_cast<uint32_t>(w.sample_rate));
  wr_u32(28, static_cast<uint32_t>(w.sample_rate) * 2);
  wr_u16(32, 2);
  wr_u16(34, 16);
  std::memcpy(out.data() + 36, "data", 4);
  wr_u32(40, data_len);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    float v = std::max(-1.0f, std::min(1.0f, w.samples[i]));
    int16_t s = static_cast<int16_t>(std::lrintf(v * 32767.0f));
    wr_u16(44 + 2 * i, static_cast<uint16_t>(s));
  }
  return out;
}

std::vector<std::vector<float>> mel_filterbank(int mel_bins, int n_fft,
                                               int sample_rate, double fmin,
                                               double fmax) {
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> hz_pts(mel_bins + 2);
  for (int k = 0; k < mel_bins + 2; ++k) {
    hz_pts[k] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * k / (mel_bins + 1));
  }
  std::vector<std::vector<float>> fb(mel_bins,
                                     std::vector<float>(n_bins, 0.0f));
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  for (int b = 0; b < mel_bins; ++b) {
    const double lo = hz_pts[b], mid = hz_pts[b + 1], hi = hz_pts[b + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < hi) {
        w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
      fb[b][k] = static_cast<float>(w);
    }
  }
  return fb;
}

Spectrogram log_mel(const Waveform& w, const MelConfig& cfg) {
  if (w.sample_rate <= 0 || w.samples.empty()) {
    throw ArgumentError("log_mel: empty waveform");
  }
  const int win = static_cast<int>(std::lround(cfg.window_s * w.sample_rate));
  const int hop = static_cast<int>(std::lround(cfg.hop_s * w.sample_rate));
  if (win <= 0 || hop <= 0) throw ArgumentError("log_mel: bad window/hop");
  const int len = static_cast<int>(w.samples.size());
  if (len < win) {
    throw ArgumentError("log_mel: waveform of " + std::to_string(len) +
                        " samples is shorter than one window (" +
                        std::to_string(win) + ")");
  }
  const int n_fft = next_pow2(win);
  const int n_bins = n_fft / 2 + 1;
  const int frames = 1 + (len - win) / hop;

  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win);
  }
  const auto fb =
      mel_filterbank(cfg.mel_bins, n_fft, w.sample_rate, cfg.fmin, cfg.fmax);

  Spectrogram out;
  out.t = frames;
  out.f = cfg.mel_bins;
  out.frame_hop_s = static_cast<double>(hop) / w.sample_rate;
  out.frames.resize(static_cast<size_t>(frames) * cfg.mel_bins);

  std::vector<double> re(n_fft), im(n_fft), power(n_bins);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < win; ++i) {
      re[i] = static_cast<double>(w.samples[start + i]) * hann[i];
    }
    fft_radix2(re, im);
    for (int k = 0; k < n_bins; ++k) {
      power[k] = re[k] * re[k] + im[k] * im[k];
    }
    for (int b = 0; b < cfg.mel_bins; ++b) {
      double acc = 0.0;
      const auto& filt = fb[b];
      for (int k = 0; k < n_bins; ++k) acc += filt[k] * power[k];
      out.at(t, b) = static_cast<float>(std::log(acc + kLogFloor));
    }
  }
  return out;
}

}  // namespace mast
