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

#include "mast/ssl.hpp"
#include "mast/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mast;
using testutil::random_tensor;

namespace {

// Rows of unit vectors such that every anchor/other dot product is zero.
std::pair<Tensor, Tensor> orthogonal_batches(int n) {
  const int d = 2 * n;
  std::vector<float> a(static_cast<size_t>(n) * d, 0.0f);
  std::vector<float> b(static_cast<size_t>(n) * d, 0.0f);
  for (int i = 0; i < n; ++i) {
    a[static_cast<size_t>(i) * d + i] = 1.0f;
    b[static_cast<size_t>(i) * d + n + i] = 1.0f;
  }
  return {Tensor::from_data({n, d}, std::move(a)),
          Tensor::from_data({n, d}, std::move(b))};
}

Tensor normalized_rows(int n, int d, Rng& rng) {
  auto t = random_tensor<float>({n, d}, rng);
  return l2_normalize_rows(t).detach();
}

}  // namespace

TEST_CASE("info_nce equals log(1+K) at zero similarity for K up to 63") {
  for (int k = 1; k <= 63; ++k) {
    const int n = k + 1;
    auto [za, zo] = orthogonal_batches(n);
    const float loss = info_nce(za, zo, 1.0).item();
    CHECK(std::fabs(loss - std::log1p(static_cast<float>(k))) <= 1e-6);
  }
}

TEST_CASE("info_nce goes to zero when the positive dominates") {
  // aligned pairs, orthogonal negatives, small tau: the positive term
  // saturates the softmax
  const int n = 4, d = 4;
  std::vector<float> rows(static_cast<size_t>(n) * d, 0.0f);
  for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i) * d + i] = 1.0f;
  auto z = Tensor::from_data({n, d}, rows);
  CHECK(info_nce(z, z, 0.01).item() <= 1e-3);
}

TEST_CASE("info_nce matches the direct 64-bit evaluation") {
  Rng rng(60);
  const int n = 3, d = 256;
  auto za = normalized_rows(n, d, rng);
  auto zo = normalized_rows(n, d, rng);
  const double ref = oracles::info_nce64(
      std::vector<double>(za.data().begin(), za.data().end()),
      std::vector<double>(zo.data().begin(), zo.data().end()), n, d, 0.1);
  CHECK(std::fabs(info_nce(za, zo, 0.1).item() - ref) <= 1e-6);
}

TEST_CASE("tau only divides the similarities") {
  Rng rng(61);
  auto za = normalized_rows(5, 16, rng);
  auto zo = normalized_rows(5, 16, rng);
  const double tau = 0.07;
  auto sims = matmul(za, transpose(zo));
  auto a = info_nce_from_similarities(sims, tau);
  auto b = info_nce_from_similarities(
      scale(sims, static_cast<float>(1.0 / tau)), 1.0);
  CHECK(a.item() == b.item());  // bitwise
}

TEST_CASE("symmetric_loss is exactly symmetric and non-negative") {
  Rng rng(62);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = rng.uniform_int(2, 6);
    auto f = normalized_rows(n, 32, rng);
    auto h = normalized_rows(n, 32, rng);
    const float ab = symmetric_loss(f, h, 0.2).item();
    const float ba = symmetric_loss(h, f, 0.2).item();
    CHECK(ab == ba);
    CHECK(ab >= 0.0f);
  }
}

TEST_CASE("symmetric_loss hand value for orthonormal N=2 at tau=1") {
  auto z = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const double expected = 2.0 * (-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)));
  CHECK(symmetric_loss(z, z, 1.0).item() == doctest::Approx(expected));
}

TEST_CASE("info_nce rejects degenerate batches and temperatures") {
  Rng rng(63);
  auto one = normalized_rows(1, 8, rng);
  CHECK_THROWS_AS(info_nce(one, one, 0.1), ArgumentError);
  auto two = normalized_rows(2, 8, rng);
  CHECK_THROWS_AS(info_nce(two, two, 0.0), ArgumentError);
  CHECK_THROWS_AS(info_nce(two, two, -1.0), ArgumentError);
}

TEST_CASE("info_nce gradient passes the 64-bit check") {
  Rng rng(64);
  auto za = random_tensor<double>({4, 8}, rng);
  auto zo = random_tensor<double>({4, 8}, rng);
  auto f = [](const std::vector<Tensor64>& in) {
    return info_nce(l2_normalize_rows(in[0]), l2_normalize_rows(in[1]), 0.3);
  };
  auto report = finite_diff_check<double>("info_nce", f, {za, zo}, 1e-4,
                                          1e-5);
  CAPTURE(report.max_rel_err);
  CHECK(report.passed);
}

TEST_CASE("ema_update endpoint and closed-form behavior") {
  auto cfg = testutil::micro_config();
  auto student = init_weights<float>(cfg, 1);

  // m = 1: teacher unchanged
  auto teacher = make_teacher(student, 1.0);
  auto other = init_weights<float>(cfg, 2);
  ema_update(teacher.params, other, 1.0f);
  for (size_t i = 0; i < teacher.params.size(); ++i) {
    CHECK(std::memcmp(teacher.params.tensor(i).data().data(),
                      student.tensor(i).data().data(),
                      sizeof(float) * student.tensor(i).size()) == 0);
  }

  // m = 0: teacher equals student
  ema_update(teacher.params, other, 0.0f);
  for (size_t i = 0; i < teacher.params.size(); ++i) {
    CHECK(std::memcmp(teacher.params.tensor(i).data().data(),
                      other.tensor(i).data().data(),
                      sizeof(float) * other.tensor(i).size()) == 0);
  }

  // two steps from known scalars follow the geometric blend, and the fused
  // elementwise expression matches bitwise
  const float m = 0.99f;
  float t = 2.0f;
  const float s1 = 1.0f, s2 = -3.0f;
  Params tt, ss;
  auto tt0 = Tensor::from_data({1}, {t});
  tt.add("x", tt0);
  auto ss0 = Tensor::from_data({1}, {s1});
  ss.add("x", ss0);
  ema_update(tt, ss, m);
  t = m * t + (1.0f - m) * s1;
  CHECK(tt.get("x").data()[0] == t);
  ss.get("x").data_mut()[0] = s2;
  ema_update(tt, ss, m);
  t = m * t + (1.0f - m) * s2;
  CHECK(tt.get("x").data()[0] == t);

  // mismatched trees are rejected
  Params wrong;
  auto w0 = Tensor::zeros({2});
  wrong.add("y", w0);
  CHECK_THROWS_AS(ema_update(wrong, ss, m), StateError);
}

TEST_CASE("pretrain_step trains the student and EMAs the teacher") {
  auto cfg = testutil::micro_config();
  SslConfig ssl;
  ssl.patch_drop = 0.2;
  ssl.tau = 0.07;
  ssl.momentum = 0.9;

  auto student = init_weights<float>(cfg, 5);
  attach_projection_head(student, cfg.stages.back().dim, 16, 5);
  auto teacher = make_teacher(student, ssl.momentum);
  AdamConfig acfg;
  acfg.lr = 1e-3;
  AdamW opt(student, acfg);

  SynthSpec synth;
  synth.seed = 4;
  synth.duration_frames = cfg.frames;
  synth.mel_bins = cfg.mel_bins;
  auto data = gen_synthetic(synth, 8);
  std::vector<const Spectrogram*> batch;
  for (const auto& s : data) batch.push_back(&s.spec);

  // snapshot for the EMA contract: after the step the teacher must equal
  // m * teacher_before + (1-m) * student_after, elementwise and bitwise
  auto teacher_before = clone_detached(teacher.params);
  auto stats = pretrain_step(cfg, ssl, batch, student, teacher, opt,
                             1e-3, Rng(77));
  CHECK(std::isfinite(stats.loss));
  CHECK(stats.loss > 0.0f);

  const float m = static_cast<float>(ssl.momentum);
  for (size_t i = 0; i < student.size(); ++i) {
    auto tb = teacher_before.tensor(i).data();
    auto sa = student.tensor(i).data();
    auto ta = teacher.params.tensor(i).data();
    for (int64_t j = 0; j < student.tensor(i).size(); ++j) {
      const float expect = m * tb[j] + (1.0f - m) * sa[j];
      CHECK(ta[j] == expect);
    }
  }

  std::vector<const Spectrogram*> tiny = {&data[0].spec};
  CHECK_THROWS_AS(pretrain_step(cfg, ssl, tiny, student, teacher, opt, 1e-3,
                                Rng(1)),
                  ArgumentError);
}

TEST_CASE("short micro pretraining lowers the contrastive loss") {
  auto cfg = testutil::micro_config();
  SslConfig ssl;
  ssl.patch_drop = 0.2;
  ssl.momentum = 0.9;

  auto student = init_weights<float>(cfg, 6);
  attach_projection_head(student, cfg.stages.back().dim, 16, 6);
  auto teacher = make_teacher(student, ssl.momentum);
  AdamConfig acfg;
  acfg.lr = 2e-3;
  AdamW opt(student, acfg);

  SynthSpec synth;
  synth.seed = 8;
  synth.duration_frames = cfg.frames;
  synth.mel_bins = cfg.mel_bins;
  auto data = gen_synthetic(synth, 16);
  std::vector<const Spectrogram*> batch;
  for (const auto& s : data) batch.push_back(&s.spec);

  Rng steps(123);
  float first = 0.0f, last = 0.0f;
  for (int s = 0; s < 30; ++s) {
    auto stats =
        pretrain_step(cfg, ssl, batch, student, teacher, opt, 2e-3,
                      steps.split(s));
    if (s == 0) first = stats.loss;
    last = stats.loss;
  }
  CHECK(last < first);
}
