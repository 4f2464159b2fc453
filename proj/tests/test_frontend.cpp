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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "mast/augment.hpp"
#include "mast/patches.hpp"
#include "mast/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mast;
using testutil::random_tensor;

namespace {

constexpr double kTau = 6.283185307179586;

Waveform tone(double hz, double seconds, int sr, float amp = 0.5f) {
  Waveform w;
  w.sample_rate = sr;
  const int n = static_cast<int>(seconds * sr);
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    w.samples[i] = amp * static_cast<float>(std::sin(kTau * hz * i / sr));
  }
  return w;
}

Spectrogram random_spec(int t, int f, Rng& rng) {
  Spectrogram s;
  s.t = t;
  s.f = f;
  s.frames.resize(static_cast<size_t>(t) * f);
  for (auto& v : s.frames) v = static_cast<float>(rng.normal());
  return s;
}

Tensor identity_projection(int pd) {
  std::vector<float> w(static_cast<size_t>(pd) * pd, 0.0f);
  for (int i = 0; i < pd; ++i) w[static_cast<size_t>(i) * pd + i] = 1.0f;
  return Tensor::from_data({pd, pd}, std::move(w));
}

}  // namespace

TEST_CASE("decode_wav scaling and sample counts") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0f);
  auto round = decode_wav(encode_wav(w));
  CHECK(round.sample_rate == 16000);
  CHECK(round.samples.size() == 16000);
  for (float v : round.samples) CHECK(v == 0.0f);

  // a full-scale +32767 sample decodes to 32767/32768 (the encoder scales
  // by 32767, so -1.0 also lands on -32767)
  Waveform peak;
  peak.sample_rate = 8000;
  peak.samples = {1.0f, -1.0f, 0.0f};
  auto bytes = encode_wav(peak);
  auto dec = decode_wav(bytes);
  CHECK(dec.samples[0] == doctest::Approx(32767.0f / 32768.0f));
  CHECK(dec.samples[1] == doctest::Approx(-32767.0f / 32768.0f));
}

TEST_CASE("decode_wav rejects other codecs with chunk details") {
  Waveform w;
  w.sample_rate = 8000;
  w.samples.assign(64, 0.0f);
  auto bytes = encode_wav(w);

  auto stereo = bytes;
  stereo[22] = 2;  // fmt channel count
  try {
    decode_wav(stereo);
    CHECK_MESSAGE(false, "expected a format error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("fmt") != std::string::npos);
    CHECK(msg.find("2 channels") != std::string::npos);
  }

  auto eightbit = bytes;
  eightbit[34] = 8;  // fmt bit depth
  CHECK_THROWS_AS(decode_wav(eightbit), DataError);

  auto mulaw = bytes;
  mulaw[20] = 7;  // fmt codec tag
  CHECK_THROWS_AS(decode_wav(mulaw), DataError);

  auto truncated = std::vector<uint8_t>(bytes.begin(), bytes.begin() + 30);
  CHECK_THROWS_AS(decode_wav(truncated), DataError);
}

TEST_CASE("log_mel silence, frame count and short input") {
  Waveform silence;
  silence.sample_rate = 16000;
  silence.samples.assign(16000, 0.0f);
  auto s = log_mel(silence);
  CHECK(s.t == 98);  // 1 + floor((16000 - 400) / 160)
  CHECK(s.f == 64);
  const float expected = std::log(1e-6f);
  for (float v : s.frames) CHECK(v == doctest::Approx(expected));

  Waveform tooshort;
  tooshort.sample_rate = 16000;
  tooshort.samples.assign(399, 0.0f);
  CHECK_THROWS_AS(log_mel(tooshort), ArgumentError);
}

TEST_CASE("log_mel pure tone lands in the filterbank-predicted bin") {
  const int sr = 16000;
  auto w = tone(1000.0, 1.0, sr);
  auto s = log_mel(w);

  // locate the expected mel bin from the filterbank construction: the
  // filter with the largest response at the tone's FFT bin
  const int n_fft = next_pow2(static_cast<int>(0.025 * sr));
  const auto fb = mel_filterbank(64, n_fft, sr, 0.0, sr / 2.0);
  const int tone_bin =
      static_cast<int>(std::lround(1000.0 * n_fft / sr));
  int expected = 0;
  for (int b = 1; b < 64; ++b) {
    if (fb[b][tone_bin] > fb[expected][tone_bin]) expected = b;
  }

  for (int t = 0; t < s.t; ++t) {
    int arg = 0;
    for (int f = 1; f < s.f; ++f) {
      if (s.at(t, f) > s.at(t, arg)) arg = f;
    }
    CHECK(arg == expected);
  }
}

TEST_CASE("log_mel shifts by one frame when input shifts by one hop") {
  Rng rng(17);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (auto& v : w.samples) v = 0.1f * static_cast<float>(rng.normal());

  Waveform shifted;
  shifted.sample_rate = w.sample_rate;
  shifted.samples.assign(w.samples.begin() + 160, w.samples.end());

  auto a = log_mel(w);
  auto b = log_mel(shifted);
  REQUIRE(b.t == a.t - 1);
  for (int t = 0; t < b.t; ++t) {
    for (int f = 0; f < a.f; ++f) {
      CHECK(std::fabs(b.at(t, f) - a.at(t + 1, f)) <= 1e-5);
    }
  }
}

TEST_CASE("patchify grid arithmetic and identity projection") {
  Rng rng(18);
  auto s = random_spec(64, 64, rng);
  const int pd = 16;
  auto w = identity_projection(pd);
  auto b = Tensor::zeros({pd});
  auto g = patchify(s, 4, 4, w, b);
  CHECK(g.grid_t == 16);
  CHECK(g.grid_f == 16);
  CHECK(g.count() == 256);
  CHECK(g.tokens.dim(1) == 16);

  // token j reproduces its patch values under the identity projection
  for (int a = 0; a < 4; ++a) {
    for (int c = 0; c < 4; ++c) {
      const int tok = 3 * 16 + 2;  // patch (3, 2)
      CHECK(g.tokens.data()[static_cast<size_t>(tok) * pd + a * 4 + c] ==
            doctest::Approx(s.at(3 * 4 + a, 2 * 4 + c)));
    }
  }

  CHECK_THROWS_AS(patchify(s, 65, 4, w, b), ArgumentError);
}

TEST_CASE("patchify then unpatchify is lossless on divisible shapes") {
  Rng rng(19);
  auto s = random_spec(12, 8, rng);
  auto g = patchify(s, 4, 4, identity_projection(16), Tensor::zeros({16}));
  auto rebuilt = oracles::unpatchify(
      std::vector<float>(g.tokens.data().begin(), g.tokens.data().end()),
      g.grid_t, g.grid_f, 4, 4);
  REQUIRE(rebuilt.t == s.t);
  REQUIRE(rebuilt.f == s.f);
  for (size_t i = 0; i < s.frames.size(); ++i) {
    CHECK(rebuilt.frames[i] == doctest::Approx(s.frames[i]));
  }
}

TEST_CASE("patchify edge-replicates non-divisible extents") {
  Rng rng(20);
  auto s = random_spec(65, 64, rng);
  auto g = patchify(s, 4, 4, identity_projection(16), Tensor::zeros({16}));
  CHECK(g.grid_t == 17);
  CHECK(g.grid_f == 16);
  // the padded rows replicate the last frame
  const int tok = 16 * 16;  // patch (16, 0) covers rows 64..67 -> all row 64
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(g.tokens.data()[static_cast<size_t>(tok) * 16 + i * 4 + j] ==
            doctest::Approx(s.at(64, j)));
    }
  }
}

TEST_CASE("patch_drop keeps exactly n - round(j*n) tokens") {
  Rng rng(21);
  auto s = random_spec(40, 40, rng);
  auto g = patchify(s, 4, 4, identity_projection(16), Tensor::zeros({16}));
  REQUIRE(g.count() == 100);

  Rng drop_rng(7);
  auto dropped = patch_drop(g, 0.2, drop_rng);
  CHECK(dropped.count() == 80);
  CHECK(dropped.grid_t == 10);
  CHECK(dropped.grid_f == 10);

  // kept indices ascend and kept token values are bit-exact
  for (size_t i = 0; i < dropped.kept.size(); ++i) {
    if (i > 0) CHECK(dropped.kept[i] > dropped.kept[i - 1]);
    const int src = dropped.kept[i];
    CHECK(std::memcmp(
              dropped.tokens.data().data() + i * 16,
              g.tokens.data().data() + static_cast<size_t>(src) * 16,
              16 * sizeof(float)) == 0);
  }

  // j = 0 is the identity
  Rng r0(7);
  auto same = patch_drop(g, 0.0, r0);
  CHECK(same.count() == 100);
  CHECK(same.kept == full_kept(100));

  // fixed seed, identical kept set
  Rng ra(123), rb(123);
  CHECK(patch_drop(g, 0.2, ra).kept == patch_drop(g, 0.2, rb).kept);

  Rng rc(1);
  CHECK_THROWS_AS(patch_drop(g, 1.0, rc), ArgumentError);
  CHECK_THROWS_AS(patch_drop(g, -0.1, rc), ArgumentError);
}

TEST_CASE("resized_crop full-extent crop is the identity") {
  Rng rng(22);
  auto s = random_spec(32, 24, rng);
  auto y = resized_crop(s, 0, 0, 32, 24);
  for (size_t i = 0; i < s.frames.size(); ++i) {
    CHECK(y.frames[i] == s.frames[i]);
  }
}

TEST_CASE("random_resized_crop preserves shape and constants") {
  Rng rng(23);
  auto s = random_spec(32, 24, rng);
  for (int rep = 0; rep < 20; ++rep) {
    auto y = random_resized_crop(s, rng);
    CHECK(y.t == s.t);
    CHECK(y.f == s.f);
  }
  Spectrogram flat;
  flat.t = 16;
  flat.f = 16;
  flat.frames.assign(256, 2.5f);
  for (int rep = 0; rep < 10; ++rep) {
    auto y = random_resized_crop(flat, rng);
    for (float v : y.frames) CHECK(v == doctest::Approx(2.5f));
  }
}

TEST_CASE("mixup is the expected convex combination") {
  Rng rng(24);
  auto a = random_spec(8, 8, rng);
  auto b = random_spec(8, 8, rng);

  auto full = mixup(a, b, 1.0f);
  for (size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(full.frames[i] == a.frames[i]);
  }

  auto neg = a;
  for (auto& v : neg.frames) v = -v;
  auto zero = mixup(a, neg, 0.5f);
  for (float v : zero.frames) CHECK(v == doctest::Approx(0.0f));

  auto m = mixup(a, b, 0.3f);
  for (size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(std::fabs(m.frames[i] -
                    (0.3f * a.frames[i] + 0.7f * b.frames[i])) <= 1e-7);
  }

  // affine: mixup(s, s, lambda) == s for any lambda
  for (float lam : {0.0f, 0.25f, 0.8f, 1.0f}) {
    auto self = mixup(a, a, lam);
    for (size_t i = 0; i < a.frames.size(); ++i) {
      CHECK(self.frames[i] == doctest::Approx(a.frames[i]));
    }
  }

  auto small = random_spec(4, 8, rng);
  CHECK_THROWS_AS(mixup(a, small, 0.5f), ArgumentError);
  CHECK_THROWS_AS(mixup(a, b, 1.5f), ArgumentError);
}

TEST_CASE("gen_synthetic class structure and determinism") {
  SynthSpec clean;
  clean.noise_sigma = 0.0f;
  clean.seed = 5;
  auto sample = gen_synthetic_sample(clean, 0);  // class 0
  REQUIRE(sample.label == 0);
  std::set<int> nonzero_bins;
  for (int t = 0; t < sample.spec.t; ++t) {
    for (int f = 0; f < sample.spec.f; ++f) {
      if (sample.spec.at(t, f) != 0.0f) nonzero_bins.insert(f);
    }
  }
  CHECK(nonzero_bins == std::set<int>{4, 8, 12});

  SynthSpec noisy;
  noisy.seed = 9;
  auto a = gen_synthetic(noisy, 20);
  auto b = gen_synthetic(noisy, 20);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].spec.frames == b[i].spec.frames);
  }
  // sample i depends only on (seed, i): prefixes are stable
  auto longer = gen_synthetic(noisy, 40);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(longer[i].spec.frames == a[i].spec.frames);
  }
}

TEST_CASE("synthetic task is linearly learnable") {
  // a linear classifier on flattened spectrograms must reach >= 95%,
  // confirming that the toy task is trivially separable
  SynthSpec spec;
  spec.seed = 0;
  auto train = gen_synthetic(spec, 400);
  SynthSpec test_spec;
  test_spec.seed = 1;
  auto test = gen_synthetic(test_spec, 200);

  const int d = 64 * 64;
  std::vector<float> flat;
  std::vector<int> labels;
  for (const auto& s : train) {
    flat.insert(flat.end(), s.spec.frames.begin(), s.spec.frames.end());
    labels.push_back(s.label);
  }
  auto x = Tensor::from_data({static_cast<int>(train.size()), d},
                             std::move(flat));
  auto w = Tensor::zeros({d, 10});
  w.set_requires_grad(true);
  auto b = Tensor::zeros({10});
  b.set_requires_grad(true);
  for (int e = 0; e < 60; ++e) {
    w.zero_grad();
    b.zero_grad();
    auto loss = cross_entropy(add_rowvec(matmul(x, w), b), labels);
    loss.backward();
    auto wm = w.data_mut();
    auto gw = w.grad();
    for (size_t i = 0; i < wm.size(); ++i) wm[i] -= 0.5f * gw[i];
    auto bm = b.data_mut();
    auto gb = b.grad();
    for (size_t i = 0; i < bm.size(); ++i) bm[i] -= 0.5f * gb[i];
  }
  int correct = 0;
  for (const auto& s : test) {
    std::vector<float> logits(10);
    for (int c = 0; c < 10; ++c) {
      double acc = b.data()[c];
      for (int i = 0; i < d; ++i) {
        acc += static_cast<double>(s.spec.frames[i]) *
               w.data()[static_cast<size_t>(i) * 10 + c];
      }
      logits[c] = static_cast<float>(acc);
    }
    int arg = 0;
    for (int c = 1; c < 10; ++c) {
      if (logits[c] > logits[arg]) arg = c;
    }
    if (arg == s.label) ++correct;
  }
  CHECK(correct >= 190);  // 95% of 200
}
