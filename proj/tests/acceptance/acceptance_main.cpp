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

// End-to-end verification gate. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures. Run from anywhere; work files go
// to a scratch directory under the system temp path.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mast/optimizer.hpp"
#include "mast/ssl.hpp"
#include "mast/trainer.hpp"
#include "../oracles.hpp"
#include "../test_util.hpp"

using namespace mast;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void criterion(const std::string& name,
               const std::function<std::string()>& body) {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%s  %-28s %s [%.1fs]\n", ok ? "PASS" : "FAIL", name.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
  std::string done(const std::string& detail) const {
    if (!ok) throw std::runtime_error(why);
    return detail;
  }
};

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------

std::string pyramid_shape_law() {
  Check c;
  const auto cfg = desk_config();
  const auto plan = shape_plan(cfg);
  const int tokens[4] = {256, 64, 16, 4};
  const int dims[4] = {32, 64, 128, 256};
  c.expect(plan.stages.size() == 4, "expected 4 stages");
  for (int i = 0; i < 4; ++i) {
    c.expect(plan.stages[i].tokens == tokens[i] &&
                 plan.stages[i].dim == dims[i],
             fmt("stage %d planned %dx%d, want %dx%d", i,
                 plan.stages[i].tokens, plan.stages[i].dim, tokens[i],
                 dims[i]));
  }
  // a real forward pass realizes the plan
  auto params = init_weights<float>(cfg, 0);
  SynthSpec synth;
  synth.seed = 0;
  auto sample = gen_synthetic_sample(synth, 0);
  auto out = forward_features(cfg, params,
                              embed_spectrogram(cfg, params, sample.spec));
  c.expect(out.count() == 4 && out.tokens.dim(1) == 256,
           fmt("forward produced %dx%d, want 4x256", out.count(),
               out.tokens.dim(1)));
  return c.done("stages (256,32),(64,64),(16,128),(4,256); forward 4x256");
}

std::string pooled_length_formula() {
  Check c;
  Rng rng(202);
  int cases = 0;
  while (cases < 1000) {
    const int L = rng.uniform_int(1, 48);
    const int k = rng.uniform_int(1, 6);
    const int s = rng.uniform_int(1, 5);
    const int p = rng.uniform_int(0, k - 1);
    if (L + 2 * p < k) continue;
    auto x = testutil::random_tensor<float>({L, 3, 2}, rng);
    auto kern = testutil::random_tensor<float>({2, k, 1}, rng);
    auto y = conv2d_grid(x, kern, s, 1, p, 0);
    const int expect = (L + 2 * p - k) / s + 1;
    c.expect(y.dim(0) == expect,
             fmt("L=%d k=%d s=%d p=%d gave %d, want %d", L, k, s, p,
                 y.dim(0), expect));
    ++cases;
  }
  return c.done("1000 randomized (L,k,s,p) cases match");
}

std::string mha_equivalence() {
  Check c;
  Rng rng(203);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int heads = rng.uniform_int(1, 4);
    const int dh = rng.uniform_int(1, 4);
    const int d = heads * dh;
    const int gt = rng.uniform_int(1, 4);
    const int gf = rng.uniform_int(1, 4);
    const int n = gt * gf;

    PatchGridT<float> g;
    g.grid_t = gt;
    g.grid_f = gf;
    g.kept = full_kept(n);
    g.tokens = testutil::random_tensor<float>({n, d}, rng);

    MhpaParamsT<float> p;
    p.heads = heads;
    p.w_q = testutil::random_tensor<float>({d, d}, rng, 0.4);
    p.b_q = testutil::random_tensor<float>({d}, rng, 0.1);
    p.w_k = testutil::random_tensor<float>({d, d}, rng, 0.4);
    p.b_k = testutil::random_tensor<float>({d}, rng, 0.1);
    p.w_v = testutil::random_tensor<float>({d, d}, rng, 0.4);
    p.b_v = testutil::random_tensor<float>({d}, rng, 0.1);
    p.w_o = testutil::random_tensor<float>({d, d}, rng, 0.4);
    p.b_o = testutil::random_tensor<float>({d}, rng, 0.1);
    std::vector<float> center(static_cast<size_t>(d), 1.0f);
    p.pool_q_w = Tensor::from_data({d, 1, 1}, center);
    p.pool_k_w = Tensor::from_data({d, 1, 1}, center);
    p.pool_v_w = Tensor::from_data({d, 1, 1}, center);
    p.max_delta = gt + gf;
    p.rpe_time = Tensor::zeros({2 * p.max_delta + 1, d});
    p.rpe_freq = Tensor::zeros({2 * p.max_delta + 1, d});

    auto out = mhpa(g, p, true);

    oracles::DenseMhaWeights w;
    auto grab = [](const Tensor& t) {
      return std::vector<double>(t.data().begin(), t.data().end());
    };
    w.wq = grab(p.w_q);
    w.bq = grab(p.b_q);
    w.wk = grab(p.w_k);
    w.bk = grab(p.b_k);
    w.wv = grab(p.w_v);
    w.bv = grab(p.b_v);
    w.wo = grab(p.w_o);
    w.bo = grab(p.b_o);
    auto ref = oracles::naive_dense_mha(
        std::vector<double>(g.tokens.data().begin(), g.tokens.data().end()),
        n, d, heads, w);
    for (int64_t i = 0; i < out.tokens.size(); ++i) {
      worst = std::max(worst,
                       std::fabs(out.tokens.data()[i] - ref[i]));
    }
  }
  Check cc;
  cc.expect(worst <= 1e-5, fmt("max deviation %.3g > 1e-5", worst));
  return cc.done(fmt("20 micro cases, max |mhpa - dense| = %.2g", worst));
}

std::string gradient_suite() {
  Check c;
  // every differentiable op, 5 random shapes, 64-bit, tol 1e-4, h=1e-5
  auto failures = testutil::op_gradient_suite(5, 909);
  for (const auto& f : failures) {
    c.expect(false, fmt("%s max rel err %.3g", f.op_name.c_str(),
                        f.max_rel_err));
  }

  // end-to-end check at tol 1e-3: the 32-bit model's analytic gradients
  // against central differences of the 64-bit replica, on a 2-token grid
  auto cfg = testutil::two_token_config();
  auto params = init_weights<float>(cfg, 7);
  Rng rng(910);
  Spectrogram spec;
  spec.t = cfg.frames;
  spec.f = cfg.mel_bins;
  spec.frames.resize(static_cast<size_t>(spec.t) * spec.f);
  for (auto& v : spec.frames) v = static_cast<float>(rng.normal());

  params.zero_grad();
  {
    auto g = embed_spectrogram(cfg, params, spec);
    cross_entropy(classify(cfg, params, forward_features(cfg, params, g)),
                  {1})
        .backward();
  }
  auto p64 = params_to_double(params);
  auto loss64 = [&]() {
    auto g = embed_spectrogram(cfg, p64, spec);
    return cross_entropy(classify(cfg, p64, forward_features(cfg, p64, g)),
                         {1})
        .item();
  };

  const double h = 1e-5;
  Rng pick(911);
  double worst = 0.0;
  const int target =
      std::max<int>(40, static_cast<int>(params.total_elements() / 100));
  for (int checked = 0; checked < target; ++checked) {
    const size_t pi = static_cast<size_t>(pick.uniform_u64(params.size()));
    auto& t64 = p64.tensor(pi);
    const int64_t ci = static_cast<int64_t>(
        pick.uniform_u64(static_cast<uint64_t>(t64.size())));
    const double orig = t64.data_mut()[ci];
    t64.data_mut()[ci] = orig + h;
    const double up = loss64();
    t64.data_mut()[ci] = orig - h;
    const double down = loss64();
    t64.data_mut()[ci] = orig;
    const double fd = (up - down) / (2.0 * h);
    const auto& tf = params.tensor(pi);
    const double an = tf.has_grad() ? tf.grad()[ci] : 0.0;
    worst = std::max(worst, std::fabs(an - fd) /
                                std::max({0.02, std::fabs(an),
                                          std::fabs(fd)}));
  }
  c.expect(worst <= 1e-3,
           fmt("end-to-end micro check worst rel err %.3g > 1e-3", worst));
  return c.done(fmt("all ops at 1e-4; 32-bit end-to-end grads %.2g <= 1e-3 "
                    "(%d coords)",
                    worst, target));
}

std::string infonce_closed_form() {
  Check c;
  for (int k = 1; k <= 63; ++k) {
    const int n = k + 1;
    const int d = 2 * n;
    std::vector<float> a(static_cast<size_t>(n) * d, 0.0f);
    std::vector<float> b(static_cast<size_t>(n) * d, 0.0f);
    for (int i = 0; i < n; ++i) {
      a[static_cast<size_t>(i) * d + i] = 1.0f;
      b[static_cast<size_t>(i) * d + n + i] = 1.0f;
    }
    const float loss = info_nce(Tensor::from_data({n, d}, std::move(a)),
                                Tensor::from_data({n, d}, std::move(b)), 1.0)
                           .item();
    c.expect(std::fabs(loss - std::log1p(static_cast<float>(k))) <= 1e-6,
             fmt("K=%d loss %.8f vs log(1+K) %.8f", k, loss,
                 std::log1p(static_cast<float>(k))));
  }
  // symmetric_loss invariant under argument swap, exact
  Rng rng(204);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = rng.uniform_int(2, 8);
    auto f = l2_normalize_rows(testutil::random_tensor<float>({n, 64}, rng))
                 .detach();
    auto h = l2_normalize_rows(testutil::random_tensor<float>({n, 64}, rng))
                 .detach();
    const float ab = symmetric_loss(f, h, 0.07).item();
    const float ba = symmetric_loss(h, f, 0.07).item();
    c.expect(std::memcmp(&ab, &ba, sizeof(float)) == 0,
             "swap changed the loss bits");
  }
  return c.done("log(1+K) for K in 1..63; swap exact");
}

std::string rpe_translation_invariance() {
  Check c;
  Rng rng(205);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 4 * rng.uniform_int(1, 3);
    const int maxd = rng.uniform_int(3, 9);
    const int lq = rng.uniform_int(2, 6);
    const int lkv = rng.uniform_int(2, 6);
    auto q = testutil::random_tensor<float>({lq, d}, rng);
    auto rt = testutil::random_tensor<float>({2 * maxd + 1, d}, rng);
    auto rf = testutil::random_tensor<float>({2 * maxd + 1, d}, rng);
    std::vector<std::pair<int, int>> cq, ckv, cq2, ckv2;
    for (int i = 0; i < lq; ++i) {
      cq.emplace_back(rng.uniform_int(0, 8), rng.uniform_int(0, 8));
    }
    for (int j = 0; j < lkv; ++j) {
      ckv.emplace_back(rng.uniform_int(0, 8), rng.uniform_int(0, 8));
    }
    const int dt = rng.uniform_int(-20, 20), df = rng.uniform_int(-20, 20);
    for (auto [t, f] : cq) cq2.emplace_back(t + dt, f + df);
    for (auto [t, f] : ckv) ckv2.emplace_back(t + dt, f + df);
    auto a = relative_bias(q, rt, rf, cq, ckv, maxd);
    auto b = relative_bias(q, rt, rf, cq2, ckv2, maxd);
    c.expect(std::memcmp(a.data().data(), b.data().data(),
                         sizeof(float) * a.size()) == 0,
             "bias changed under joint translation");
  }
  return c.done("bias bitwise invariant under joint shifts");
}

std::string patch_drop_counts() {
  Check c;
  Rng grid_rng(206);
  PatchGridT<float> g;
  g.grid_t = 10;
  g.grid_f = 10;
  g.kept = full_kept(100);
  g.tokens = testutil::random_tensor<float>({100, 8}, grid_rng);

  Rng r1(42), r2(42);
  auto a = patch_drop(g, 0.2, r1);
  auto b = patch_drop(g, 0.2, r2);
  c.expect(a.count() == 80, fmt("kept %d of 100, want 80", a.count()));
  c.expect(a.kept == b.kept, "same seed produced different kept sets");
  Rng r3(43);
  auto d = patch_drop(g, 0.2, r3);
  c.expect(d.count() == 80, "second seed count");
  return c.done("N=100, j=0.2 keeps exactly 80; seed-deterministic");
}

std::string overfit_smoke() {
  const auto cfg = desk_config();
  auto params = init_weights<float>(cfg, 0);
  SynthSpec synth;
  synth.seed = 0;
  auto data = gen_synthetic(synth, 8);
  Dataset ds;
  for (auto& s : data) {
    ds.specs.push_back(s.spec);
    ds.labels.push_back(s.label);
  }
  std::vector<int> idx = {0, 1, 2, 3, 4, 5, 6, 7};

  AdamConfig acfg;
  acfg.lr = 1e-3;
  AdamW opt(params, acfg);
  double loss = 1e9;
  int step = 0;
  for (; step < 500; ++step) {
    params.zero_grad();
    auto st = supervised_batch(cfg, params, ds, idx);
    loss = st.loss;
    if (loss < 0.01) break;
    opt.step(params, cosine_lr(acfg.lr, step, 500));
  }
  Check c;
  c.expect(loss < 0.01,
           fmt("cross-entropy %.4f after 500 steps, want < 0.01", loss));
  return c.done(fmt("loss %.4g after %d steps", loss, step + 1));
}

std::string synthetic_task(const fs::path& work) {
  cmd_gen_synth((work / "synth").string(), 1200, 0);
  auto manifest = read_manifest((work / "synth/manifest.csv").string());
  write_manifest((work / "synth/train.csv").string(),
                 {manifest.begin(), manifest.begin() + 1000});
  write_manifest((work / "synth/test.csv").string(),
                 {manifest.begin() + 1000, manifest.end()});

  RunConfig rc;
  rc.model = desk_config();
  rc.adam.lr = 1e-3;
  rc.batch_size = 64;
  rc.epochs = 8;
  rc.seed = 0;
  rc.paths.features_dir = (work / "synth").string();
  rc.paths.manifest = (work / "synth/train.csv").string();
  rc.paths.manifest_eval = (work / "synth/test.csv").string();
  rc.paths.metrics_out = (work / "synth/metrics.csv").string();
  auto result = run_train(rc);
  Check c;
  c.expect(result.eval_accuracy >= 0.90,
           fmt("test accuracy %.3f < 0.90", result.eval_accuracy));
  return c.done(fmt("test accuracy %.3f (1000/200 split, seed 0)",
                    result.eval_accuracy));
}

std::string ssl_directionality(const fs::path& work) {
  // shared corpus: the 1000-sample train split doubles as the unlabeled
  // pretraining pool; probes train on it and score the 200-sample test split
  const std::string dir = (work / "synth").string();
  if (!fs::exists(work / "synth/train.csv")) {
    cmd_gen_synth(dir, 1200, 0);
    auto manifest = read_manifest(dir + "/manifest.csv");
    write_manifest(dir + "/train.csv",
                   {manifest.begin(), manifest.begin() + 1000});
    write_manifest(dir + "/test.csv",
                   {manifest.begin() + 1000, manifest.end()});
  }

  auto base = [&](uint64_t seed) {
    RunConfig rc;
    rc.model = desk_config();
    rc.seed = seed;
    rc.batch_size = 64;
    rc.adam.lr = 3e-4;
    rc.paths.features_dir = dir;
    rc.paths.manifest = dir + "/train.csv";
    rc.paths.manifest_eval = dir + "/test.csv";
    return rc;
  };

  double sum_rand = 0.0, sum_pd = 0.0, sum_nopd = 0.0;
  std::string per_seed;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    // frozen random-init encoder
    auto rc = base(seed);
    const std::string rand_ckpt =
        (work / fmt("rand_%llu.mastc", (unsigned long long)seed)).string();
    save_params(rand_ckpt, init_weights<float>(rc.model, seed));
    rc.paths.checkpoint_in = rand_ckpt;
    const double acc_rand = run_probe(rc).accuracy;

    // pretrain without and with patch-drop
    double acc[2] = {0.0, 0.0};
    const double drops[2] = {0.0, 0.2};
    for (int v = 0; v < 2; ++v) {
      auto pc = base(seed);
      pc.epochs = 5;
      pc.ssl.patch_drop = drops[v];
      pc.paths.checkpoint_out =
          (work / fmt("ssl_%llu_%d.mastc", (unsigned long long)seed, v))
              .string();
      auto pre = run_pretrain(pc);
      if (pre.last_loss >= pre.first_loss) {
        std::printf("  note: seed %llu drop %.1f loss did not improve "
                    "(%.3f -> %.3f)\n",
                    (unsigned long long)seed, drops[v], pre.first_loss,
                    pre.last_loss);
      }
      auto qc = base(seed);
      qc.paths.checkpoint_in = pc.paths.checkpoint_out;
      acc[v] = run_probe(qc).accuracy;
    }
    sum_rand += acc_rand;
    sum_nopd += acc[0];
    sum_pd += acc[1];
    per_seed += fmt("s%llu rand %.3f / ssl %.3f / ssl+pd %.3f; ",
                    (unsigned long long)seed, acc_rand, acc[0], acc[1]);
    std::printf("  seed %llu: probe rand=%.3f ssl=%.3f ssl+pd=%.3f\n",
                (unsigned long long)seed, acc_rand, acc[0], acc[1]);
    std::fflush(stdout);
  }
  const double mean_rand = sum_rand / 3, mean_pd = sum_pd / 3,
               mean_nopd = sum_nopd / 3;
  Check c;
  c.expect(mean_pd - mean_rand >= 0.05,
           fmt("pretrained probe %.3f beats random %.3f by %.1f points, "
               "want >= 5",
               mean_pd, mean_rand, 100.0 * (mean_pd - mean_rand)));
  c.expect(mean_pd >= mean_nopd - 0.01,
           fmt("patch-drop probe %.3f fell more than 1 point below "
               "no-drop %.3f",
               mean_pd, mean_nopd));
  return c.done(fmt("probe means: rand %.3f, ssl %.3f, ssl+pd %.3f "
                    "(gain %.1f pts)",
                    mean_rand, mean_nopd, mean_pd,
                    100.0 * (mean_pd - mean_rand)));
}

}  // namespace

int main() {
  const fs::path work =
      fs::temp_directory_path() /
      ("mast_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  criterion("pyramid-shape-law", pyramid_shape_law);
  criterion("pooled-length-formula", pooled_length_formula);
  criterion("mha-equivalence", mha_equivalence);
  criterion("gradient-suite", gradient_suite);
  criterion("infonce-closed-form", infonce_closed_form);
  criterion("rpe-translation-invariance", rpe_translation_invariance);
  criterion("patch-drop", patch_drop_counts);
  criterion("overfit-smoke", overfit_smoke);
  criterion("synthetic-task", [&] { return synthetic_task(work); });
  criterion("ssl-directionality", [&] { return ssl_directionality(work); });

  std::error_code ec;
  fs::remove_all(work, ec);
  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures;
}
