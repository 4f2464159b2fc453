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

#include "mast/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "mast/parallel.hpp"

namespace fs = std::filesystem;

namespace mast {

namespace {

uint64_t tag(const char* s) {
  // Small FNV-1a so purpose-named rng streams stay stable.
  uint64_t h = 1469598103934665603ULL;
  for (; *s; ++s) h = (h ^ static_cast<uint8_t>(*s)) * 1099511628211ULL;
  return h;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, int interval)
      : interval_(interval), start_(std::chrono::steady_clock::now()) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot write metrics file: " + path);
    out_ << "step,split,loss,accuracy,wall_ms\n";
  }

  bool due(int64_t step, int64_t total) const {
    return step % interval_ == 0 || step + 1 == total;
  }

  void row(int64_t step, const std::string& split, double loss,
           double accuracy) {
    if (!out_.is_open()) return;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%s,%.6g,%.6g,%lld\n",
                  static_cast<long long>(step), split.c_str(), loss, accuracy,
                  static_cast<long long>(ms));
    out_ << buf;
    out_.flush();
  }

 private:
  std::ofstream out_;
  int interval_;
  std::chrono::steady_clock::time_point start_;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw ConfigError(std::string("missing required path: ") + what);
  }
  if (!fs::exists(path)) {
    throw IoError(std::string(what) + " not found: " + path);
  }
}

// A scoped requires-grad toggle for inference passes over trained params.
class FrozenScope {
 public:
  explicit FrozenScope(Params& p) : p_(p) { p_.set_requires_grad(false); }
  ~FrozenScope() { p_.set_requires_grad(true); }

 private:
  Params& p_;
};

std::string auto_prefix(const std::string& checkpoint_path) {
  for (const auto& e : read_checkpoint(checkpoint_path)) {
    if (e.name.rfind("student/", 0) == 0) return "student/";
  }
  return "";
}

int argmax(std::span<const float> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Dataset load_dataset(const std::string& features_dir,
                     const std::string& manifest_path, int num_classes) {
  const auto entries = read_manifest(manifest_path);
  if (entries.empty()) {
    throw DataError("manifest " + manifest_path + " lists no samples");
  }
  Dataset ds;
  ds.specs.resize(entries.size());
  ds.labels.resize(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto path = fs::path(features_dir) / entries[i].relative_path;
    auto [shape, data] = read_feature_file(path.string());
    if (shape.size() != 2) {
      throw DataError("feature file " + path.string() + " has rank " +
                      std::to_string(shape.size()) + ", expected 2");
    }
    Spectrogram s;
    s.t = shape[0];
    s.f = shape[1];
    s.frames = std::move(data);
    ds.specs[i] = std::move(s);
    const int label = entries[i].label;
    if (num_classes >= 0 && (label < 0 || label >= num_classes)) {
      throw DataError("manifest " + manifest_path + ": label " +
                      std::to_string(label) + " out of range [0," +
                      std::to_string(num_classes) + ") for " +
                      entries[i].relative_path);
    }
    ds.labels[i] = label;
  }
  return ds;
}

StepStats supervised_batch(const ModelConfig& cfg, Params& params,
                           const Dataset& ds, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  if (n < 1) throw ArgumentError("supervised_batch: empty batch");
  const int chunks = (n + kGradChunk - 1) / kGradChunk;
  std::vector<GradSink> sinks(static_cast<size_t>(chunks));
  std::vector<double> losses(n, 0.0);
  std::vector<char> hit(n, 0);
  const float inv_n = 1.0f / static_cast<float>(n);
  parallel_for(chunks, [&](int c) {
    const int lo = c * kGradChunk;
    const int hi = std::min(n, lo + kGradChunk);
    for (int i = lo; i < hi; ++i) {
      const auto& spec = ds.specs[idx[i]];
      const int label = ds.labels[idx[i]];
      auto tokens = embed_spectrogram(cfg, params, spec);
      auto feats = forward_features(cfg, params, tokens);
      auto logits = classify(cfg, params, feats);
      auto ce = cross_entropy(logits, {label});
      losses[i] = ce.item();
      hit[i] = argmax(logits.data()) == label ? 1 : 0;
      // Seed 1/n so accumulated gradients realize the batch-mean loss.
      backward_seeded<float>(ce, {inv_n}, nullptr, nullptr, &sinks[c]);
    }
  });
  merge_grad_sinks(params, sinks);
  StepStats st;
  for (int i = 0; i < n; ++i) {
    st.loss += losses[i];
    st.correct += hit[i];
  }
  st.loss /= n;
  return st;
}

EvalResult evaluate(const ModelConfig& cfg, Params& params,
                    const Dataset& ds) {
  FrozenScope frozen(params);
  const int n = ds.size();
  std::vector<double> losses(n, 0.0);
  std::vector<char> hit(n, 0);
  const int chunks = (n + kGradChunk - 1) / kGradChunk;
  parallel_for(chunks, [&](int c) {
    const int lo = c * kGradChunk;
    const int hi = std::min(n, lo + kGradChunk);
    for (int i = lo; i < hi; ++i) {
      auto tokens = embed_spectrogram(cfg, params, ds.specs[i]);
      auto logits = classify(cfg, params, forward_features(cfg, params, tokens));
      losses[i] = cross_entropy(logits, {ds.labels[i]}).item();
      hit[i] = argmax(logits.data()) == ds.labels[i] ? 1 : 0;
    }
  });
  EvalResult r;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    r.loss += losses[i];
    correct += hit[i];
  }
  r.loss /= n;
  r.accuracy = static_cast<double>(correct) / n;
  return r;
}

std::vector<std::vector<float>> extract_features(const ModelConfig& cfg,
                                                 Params& params,
                                                 const Dataset& ds) {
  FrozenScope frozen(params);
  const int n = ds.size();
  std::vector<std::vector<float>> feats(n);
  const int chunks = (n + kGradChunk - 1) / kGradChunk;
  parallel_for(chunks, [&](int c) {
    const int lo = c * kGradChunk;
    const int hi = std::min(n, lo + kGradChunk);
    for (int i = lo; i < hi; ++i) {
      auto tokens = embed_spectrogram(cfg, params, ds.specs[i]);
      auto f = forward_features(cfg, params, tokens);
      auto pooled = mean_pool_rows(f.tokens);
      feats[i].assign(pooled.data().begin(), pooled.data().end());
    }
  });
  return feats;
}

TrainResult run_train(const RunConfig& rc) {
  require_file(rc.paths.manifest, "paths.manifest");
  require_file(rc.paths.features_dir, "paths.features_dir");
  Dataset train =
      load_dataset(rc.paths.features_dir, rc.paths.manifest,
                   rc.model.num_classes);

  Params params = init_weights<float>(rc.model, rc.seed);
  if (!rc.paths.checkpoint_in.empty()) {
    require_file(rc.paths.checkpoint_in, "paths.checkpoint_in");
    load_params(rc.paths.checkpoint_in, params,
                auto_prefix(rc.paths.checkpoint_in), /*allow_extra=*/true);
  }
  AdamW opt(params, rc.adam);

  const int n = train.size();
  const int64_t steps_per_epoch = (n + rc.batch_size - 1) / rc.batch_size;
  const int64_t total_steps = steps_per_epoch * rc.epochs;
  MetricsWriter metrics(rc.paths.metrics_out, rc.log_interval);
  Rng shuffle_rng = Rng(rc.seed).split(tag("shuffle"));

  TrainResult result;
  int64_t step = 0;
  for (int epoch = 0; epoch < rc.epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const int lo = static_cast<int>(b) * rc.batch_size;
      const int hi = std::min(n, lo + rc.batch_size);
      std::vector<int> batch(order.begin() + lo, order.begin() + hi);
      params.zero_grad();
      StepStats st = supervised_batch(rc.model, params, train, batch);
      opt.step(params, cosine_lr(rc.adam.lr, step, total_steps));
      result.final_train_loss = st.loss;
      if (metrics.due(step, total_steps)) {
        metrics.row(step, "train", st.loss,
                    static_cast<double>(st.correct) / batch.size());
      }
    }
  }
  result.steps = total_steps;

  if (!rc.paths.manifest_eval.empty()) {
    require_file(rc.paths.manifest_eval, "paths.manifest_eval");
    Dataset test = load_dataset(rc.paths.features_dir, rc.paths.manifest_eval,
                                rc.model.num_classes);
    EvalResult ev = evaluate(rc.model, params, test);
    result.eval_accuracy = ev.accuracy;
    metrics.row(total_steps, "test", ev.loss, ev.accuracy);
  }
  if (!rc.paths.checkpoint_out.empty()) {
    save_params(rc.paths.checkpoint_out, params);
  }
  return result;
}

PretrainResult run_pretrain(const RunConfig& rc) {
  if (rc.batch_size < 2) {
    throw ConfigError("pretraining needs optimizer.batch_size >= 2");
  }
  require_file(rc.paths.manifest, "paths.manifest");
  require_file(rc.paths.features_dir, "paths.features_dir");
  Dataset data =
      load_dataset(rc.paths.features_dir, rc.paths.manifest, -1);

  Params student = init_weights<float>(rc.model, rc.seed);
  attach_projection_head(student, rc.model.stages.back().dim,
                         rc.ssl.proj_dim, rc.seed);
  TeacherState teacher = make_teacher(student, rc.ssl.momentum);
  AdamW opt(student, rc.adam);

  const int n = data.size();
  if (n < 2) throw DataError("pretraining needs at least 2 samples");
  // Partial batches below 2 samples have no negatives and are skipped.
  const int64_t steps_per_epoch = std::max<int64_t>(
      1, (n + rc.batch_size - 1) / rc.batch_size -
             ((n % rc.batch_size) == 1 ? 1 : 0));
  const int64_t total_steps = steps_per_epoch * rc.epochs;
  MetricsWriter metrics(rc.paths.metrics_out, rc.log_interval);
  Rng shuffle_rng = Rng(rc.seed).split(tag("shuffle"));
  Rng aug_root = Rng(rc.seed).split(tag("augment"));

  PretrainResult result;
  int64_t step = 0;
  for (int epoch = 0; epoch < rc.epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const int lo = static_cast<int>(b) * rc.batch_size;
      const int hi = std::min(n, lo + rc.batch_size);
      if (hi - lo < 2) break;
      std::vector<const Spectrogram*> batch;
      batch.reserve(hi - lo);
      for (int i = lo; i < hi; ++i) batch.push_back(&data.specs[order[i]]);
      auto stats = pretrain_step(rc.model, rc.ssl, batch, student, teacher,
                                 opt, cosine_lr(rc.adam.lr, step, total_steps),
                                 aug_root.split(static_cast<uint64_t>(step)));
      if (step == 0) result.first_loss = stats.loss;
      result.last_loss = stats.loss;
      if (metrics.due(step, total_steps)) {
        metrics.row(step, "pretrain", stats.loss,
                    std::numeric_limits<double>::quiet_NaN());
      }
    }
  }
  result.steps = step;

  if (!rc.paths.checkpoint_out.empty()) {
    save_params_multi(rc.paths.checkpoint_out,
                      {{"student/", &student}, {"teacher/", &teacher.params}});
  }
  return result;
}

namespace {

// Linear classifier on cached features; Adam + cosine schedule, full batch.
double train_linear_probe(const std::vector<std::vector<float>>& train_feats,
                          const std::vector<int>& train_labels,
                          const std::vector<std::vector<float>>& test_feats,
                          const std::vector<int>& test_labels,
                          int num_classes, double lr, int epochs,
                          uint64_t seed) {
  const int n = static_cast<int>(train_feats.size());
  const int d = static_cast<int>(train_feats[0].size());
  std::vector<float> flat;
  flat.reserve(static_cast<size_t>(n) * d);
  for (const auto& f : train_feats) flat.insert(flat.end(), f.begin(), f.end());
  auto x = Tensor::from_data({n, d}, std::move(flat));

  Rng rng(seed ^ tag("probe"));
  std::vector<float> w0(static_cast<size_t>(d) * num_classes);
  for (auto& v : w0) v = static_cast<float>(rng.truncated_normal(0.02));
  Params head;
  auto wt = Tensor::from_data({d, num_classes}, std::move(w0));
  wt.set_requires_grad(true);
  head.add("w", std::move(wt));
  auto bt = Tensor::zeros({num_classes});
  bt.set_requires_grad(true);
  head.add("b", std::move(bt));

  AdamConfig acfg;
  acfg.lr = lr;
  acfg.weight_decay = 0.0;
  AdamW opt(head, acfg);
  for (int e = 0; e < epochs; ++e) {
    head.zero_grad();
    auto logits = add_rowvec(matmul(x, head.get("w")), head.get("b"));
    auto loss = cross_entropy(logits, train_labels);
    loss.backward();
    opt.step(head, cosine_lr(lr, e, epochs));
  }

  int correct = 0;
  const auto& w = head.get("w");
  const auto& bias = head.get("b");
  for (size_t i = 0; i < test_feats.size(); ++i) {
    std::vector<float> logits(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
      double acc = bias.data()[c];
      for (int j = 0; j < d; ++j) {
        acc += static_cast<double>(test_feats[i][j]) *
               w.data()[static_cast<size_t>(j) * num_classes + c];
      }
      logits[static_cast<size_t>(c)] = static_cast<float>(acc);
    }
    if (argmax(logits) == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_feats.size());
}

}  // namespace

ProbeResult run_probe(const RunConfig& rc) {
  require_file(rc.paths.manifest, "paths.manifest");
  require_file(rc.paths.manifest_eval, "paths.manifest_eval");
  require_file(rc.paths.features_dir, "paths.features_dir");
  require_file(rc.paths.checkpoint_in, "paths.checkpoint_in");

  Dataset train = load_dataset(rc.paths.features_dir, rc.paths.manifest,
                               rc.model.num_classes);
  Dataset test = load_dataset(rc.paths.features_dir, rc.paths.manifest_eval,
                              rc.model.num_classes);

  Params encoder = init_weights<float>(rc.model, rc.seed);
  load_params(rc.paths.checkpoint_in, encoder,
              auto_prefix(rc.paths.checkpoint_in), /*allow_extra=*/true);

  auto train_feats = extract_features(rc.model, encoder, train);
  auto test_feats = extract_features(rc.model, encoder, test);

  ProbeResult r;
  r.accuracy = train_linear_probe(train_feats, train.labels, test_feats,
                                  test.labels, rc.model.num_classes,
                                  rc.probe_lr, rc.probe_epochs, rc.seed);
  MetricsWriter metrics(rc.paths.metrics_out, rc.log_interval);
  metrics.row(0, "probe", 0.0, r.accuracy);
  return r;
}

EvalResult run_eval(const RunConfig& rc) {
  require_file(rc.paths.checkpoint_in, "paths.checkpoint_in");
  require_file(rc.paths.features_dir, "paths.features_dir");
  const std::string manifest = rc.paths.manifest_eval.empty()
                                   ? rc.paths.manifest
                                   : rc.paths.manifest_eval;
  require_file(manifest, "paths.manifest");
  Dataset ds =
      load_dataset(rc.paths.features_dir, manifest, rc.model.num_classes);
  Params params = init_weights<float>(rc.model, rc.seed);
  load_params(rc.paths.checkpoint_in, params,
              auto_prefix(rc.paths.checkpoint_in), /*allow_extra=*/true);
  EvalResult ev = evaluate(rc.model, params, ds);
  MetricsWriter metrics(rc.paths.metrics_out, rc.log_interval);
  metrics.row(0, "eval", ev.loss, ev.accuracy);
  return ev;
}

void print_shape_plan(const ModelConfig& cfg, std::ostream& out) {
  const ShapePlan plan = shape_plan(cfg);
  out << "input: " << plan.input_tokens << " tokens ("
      << plan.input_grid_t << "x" << plan.input_grid_f << "), dim "
      << cfg.stem_dim << "\n";
  out << std::left << std::setw(7) << "stage" << std::setw(8) << "blocks"
      << std::setw(8) << "tokens" << std::setw(10) << "grid" << std::setw(6)
      << "dim" << "attention (Lq x Lkv)\n";
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& st = plan.stages[i];
    std::string attn;
    for (size_t b = 0; b < st.blocks.size(); ++b) {
      if (b) attn += " ";
      attn += std::to_string(st.blocks[b].lq) + "x" +
              std::to_string(st.blocks[b].lkv);
    }
    out << std::left << std::setw(7) << i << std::setw(8)
        << st.blocks.size() << std::setw(8) << st.tokens << std::setw(10)
        << (std::to_string(st.grid_t) + "x" + std::to_string(st.grid_f))
        << std::setw(6) << st.dim << attn << "\n";
  }
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& st = plan.stages[i];
    out << "stage," << i << "," << st.tokens << "," << st.grid_t << ","
        << st.grid_f << "," << st.dim << "\n";
  }
}

void cmd_gen_synth(const std::string& out_dir, int n, uint64_t seed,
                   float noise_sigma) {
  if (n < 1) throw ConfigError("gen-synth: --n must be >= 1");
  fs::create_directories(out_dir);
  SynthSpec spec;
  spec.seed = seed;
  spec.noise_sigma = noise_sigma;
  std::vector<ManifestEntry> manifest(static_cast<size_t>(n));
  parallel_for(n, [&](int i) {
    LabeledSpec s = gen_synthetic_sample(spec, i);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%05d.mastf", i);
    write_feature_file((fs::path(out_dir) / name).string(),
                       {s.spec.t, s.spec.f}, s.spec.frames);
    manifest[i] = ManifestEntry{name, s.label};
  });
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
}

void cmd_featurize(const std::string& wav_dir, const std::string& out_dir,
                   int mel_bins) {
  require_file(wav_dir, "--wav-dir");
  fs::create_directories(out_dir);
  std::vector<fs::path> wavs;
  for (const auto& e : fs::recursive_directory_iterator(wav_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      wavs.push_back(e.path());
    }
  }
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty()) {
    throw DataError("featurize: no .wav files under " + wav_dir);
  }
  std::vector<ManifestEntry> manifest(wavs.size());
  parallel_for(static_cast<int>(wavs.size()), [&](int i) {
    const auto rel = fs::relative(wavs[i], wav_dir);
    MelConfig mc;
    mc.mel_bins = mel_bins;
    Spectrogram s = log_mel(read_wav(wavs[i].string()), mc);
    auto rel_out = rel;
    rel_out.replace_extension(".mastf");
    const auto out_path = fs::path(out_dir) / rel_out;
    fs::create_directories(out_path.parent_path());
    write_feature_file(out_path.string(), {s.t, s.f}, s.frames);
    // Integer parent directory names double as labels, as in class-per-dir
    // layouts; everything else is unlabeled.
    int label = -1;
    const std::string parent = rel.parent_path().filename().string();
    if (!parent.empty() &&
        parent.find_first_not_of("0123456789") == std::string::npos) {
      label = std::stoi(parent);
    }
    manifest[i] = ManifestEntry{rel_out.generic_string(), label};
  });
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
}

}  // namespace mast
