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

#include "mast/ssl.hpp"

#include <numeric>

#include "mast/parallel.hpp"

namespace mast {

template <class S>
TensorT<S> info_nce_from_similarities(const TensorT<S>& sims, double tau) {
  if (tau <= 0.0) {
    throw ArgumentError("info_nce: tau must be positive, got " +
                        std::to_string(tau));
  }
  if (sims.rank() != 2 || sims.dim(0) != sims.dim(1)) {
    throw ArgumentError("info_nce: similarity matrix must be square, got " +
                        shape_str(sims.shape()));
  }
  const int n = sims.dim(0);
  if (n < 2) {
    throw ArgumentError(
        "info_nce: batch of " + std::to_string(n) +
        " leaves no negatives; need at least 2 samples");
  }
  std::vector<int> diagonal(static_cast<size_t>(n));
  std::iota(diagonal.begin(), diagonal.end(), 0);
  auto logits = scale(sims, static_cast<S>(1.0 / tau));
  return cross_entropy(logits, diagonal);
}

template <class S>
TensorT<S> info_nce(const TensorT<S>& z_anchor, const TensorT<S>& z_other,
                    double tau) {
  if (!z_anchor.defined() || !z_other.defined() || z_anchor.rank() != 2 ||
      z_other.rank() != 2 || z_anchor.shape() != z_other.shape()) {
    throw ArgumentError("info_nce: embeddings must share an [N, d] shape");
  }
  return info_nce_from_similarities(matmul(z_anchor, transpose(z_other)),
                                    tau);
}

template <class S>
TensorT<S> symmetric_loss(const TensorT<S>& f_out, const TensorT<S>& h_out,
                          double tau) {
  return add(info_nce(f_out, h_out, tau), info_nce(h_out, f_out, tau));
}

void attach_projection_head(Params& params, int final_dim, int proj_dim,
                            uint64_t seed) {
  Rng rng(seed ^ 0x70726f6aULL);  // distinct stream from encoder init
  std::vector<float> w(static_cast<size_t>(final_dim) * proj_dim);
  for (auto& v : w) v = static_cast<float>(rng.truncated_normal(0.02));
  auto wt = Tensor::from_data({final_dim, proj_dim}, std::move(w));
  wt.set_requires_grad(true);
  auto bt = Tensor::zeros({proj_dim});
  bt.set_requires_grad(true);
  params.add("proj/w", std::move(wt));
  params.add("proj/b", std::move(bt));
}

TeacherState make_teacher(const Params& student, double momentum) {
  if (momentum < 0.0 || momentum > 1.0) {
    throw ArgumentError("teacher momentum must lie in [0, 1]");
  }
  TeacherState t;
  t.params = clone_detached(student);
  t.params.set_requires_grad(false);
  t.momentum = static_cast<float>(momentum);
  return t;
}

void ema_update(Params& teacher, const Params& student, float m) {
  if (teacher.size() != student.size()) {
    throw StateError("ema_update: parameter trees differ in size");
  }
  for (size_t i = 0; i < teacher.size(); ++i) {
    if (teacher.name(i) != student.name(i) ||
        teacher.tensor(i).shape() != student.tensor(i).shape()) {
      throw StateError("ema_update: tree mismatch at '" + teacher.name(i) +
                       "' vs '" + student.name(i) + "'");
    }
    auto t = teacher.tensor(i).data_mut();
    auto s = student.tensor(i).data();
    for (size_t j = 0; j < t.size(); ++j) {
      t[j] = m * t[j] + (1.0f - m) * s[j];
    }
  }
}

Tensor encode_projected(const ModelConfig& cfg, const Params& params,
                        const Spectrogram& view, double drop_j,
                        Rng* drop_rng) {
  PatchGrid g = embed_spectrogram(cfg, params, view);
  if (drop_j > 0.0) {
    if (!drop_rng) {
      throw ArgumentError("encode_projected: patch drop needs an rng");
    }
    g = patch_drop(g, drop_j, *drop_rng);
  }
  auto feats = forward_features(cfg, params, g);
  auto pooled = mean_pool_rows(feats.tokens);
  auto projected =
      add_rowvec(matmul(pooled, params.get("proj/w")), params.get("proj/b"));
  return l2_normalize_rows(projected);
}

PretrainStepStats pretrain_step(const ModelConfig& cfg, const SslConfig& ssl,
                                const std::vector<const Spectrogram*>& batch,
                                Params& student, TeacherState& teacher,
                                AdamW& opt, double lr_now, Rng rng) {
  const int n = static_cast<int>(batch.size());
  if (n < 2) {
    throw ArgumentError("pretrain_step: batch of " + std::to_string(n) +
                        " has no negatives; need at least 2 samples");
  }

  // Per-sample augmentation streams, split up-front so results do not
  // depend on execution order.
  std::vector<Rng> view_rng_a, view_rng_b, drop_rng_a, drop_rng_b;
  std::vector<int> partner_a(n), partner_b(n);
  std::vector<float> lambda_a(n), lambda_b(n);
  for (int i = 0; i < n; ++i) {
    Rng s = rng.split(static_cast<uint64_t>(i));
    view_rng_a.push_back(s.split(0));
    view_rng_b.push_back(s.split(1));
    drop_rng_a.push_back(s.split(2));
    drop_rng_b.push_back(s.split(3));
    Rng mix = s.split(4);
    partner_a[i] = mix.uniform_int(0, n - 1);
    lambda_a[i] = static_cast<float>(mix.uniform());
    partner_b[i] = mix.uniform_int(0, n - 1);
    lambda_b[i] = static_cast<float>(mix.uniform());
  }

  // RRC first (so mixup partners mix cropped views), then in-batch mixup.
  std::vector<Spectrogram> rrc_a(n), rrc_b(n);
  parallel_for(n, [&](int i) {
    rrc_a[i] = random_resized_crop(*batch[i], view_rng_a[i]);
    rrc_b[i] = random_resized_crop(*batch[i], view_rng_b[i]);
  });
  std::vector<Spectrogram> view_a(n), view_b(n);
  parallel_for(n, [&](int i) {
    view_a[i] = mixup(rrc_a[i], rrc_a[partner_a[i]], lambda_a[i]);
    view_b[i] = mixup(rrc_b[i], rrc_b[partner_b[i]], lambda_b[i]);
  });

  // Student forwards (graphs retained) and teacher forwards (no graph),
  // in fixed chunks.
  std::vector<Tensor> z_student(n);
  std::vector<Tensor> z_teacher(n);
  const int chunks = (n + kGradChunk - 1) / kGradChunk;
  parallel_for(chunks, [&](int c) {
    const int lo = c * kGradChunk;
    const int hi = std::min(n, lo + kGradChunk);
    for (int i = lo; i < hi; ++i) {
      z_student[i] = encode_projected(cfg, student, view_a[i],
                                      ssl.patch_drop, &drop_rng_a[i]);
      z_teacher[i] = encode_projected(cfg, teacher.params, view_b[i],
                                      ssl.patch_drop, &drop_rng_b[i]);
    }
  });

  // Batch loss on stacked embeddings; the teacher side carries no graph, so
  // it is gradient-stopped in both terms.
  auto zs = concat_rows(z_student);
  auto zt = concat_rows(z_teacher);
  auto loss = symmetric_loss(zs, zt, ssl.tau);

  // Gradients of the per-sample embeddings first, then the heavy per-sample
  // encoder walks in parallel chunks.
  std::unordered_set<const detail::Node<float>*> stops;
  for (const auto& z : z_student) stops.insert(z.node());
  std::unordered_map<const detail::Node<float>*, std::vector<float>> zgrads;
  backward_seeded<float>(loss, {1.0f}, &stops, &zgrads, nullptr);

  student.zero_grad();
  std::vector<GradSink> sinks(static_cast<size_t>(chunks));
  parallel_for(chunks, [&](int c) {
    const int lo = c * kGradChunk;
    const int hi = std::min(n, lo + kGradChunk);
    for (int i = lo; i < hi; ++i) {
      auto it = zgrads.find(z_student[i].node());
      if (it == zgrads.end()) continue;
      backward_seeded<float>(z_student[i], it->second, nullptr, nullptr,
                             &sinks[c]);
    }
  });
  merge_grad_sinks(student, sinks);

  opt.step(student, lr_now);
  ema_update(teacher, student);

  PretrainStepStats stats;
  stats.loss = loss.item();
  return stats;
}

#define MAST_INSTANTIATE_SSL(S)                                             \
  template TensorT<S> info_nce(const TensorT<S>&, const TensorT<S>&,        \
                               double);                                     \
  template TensorT<S> info_nce_from_similarities(const TensorT<S>&,         \
                                                 double);                   \
  template TensorT<S> symmetric_loss(const TensorT<S>&, const TensorT<S>&,  \
                                     double);

MAST_INSTANTIATE_SSL(float)
MAST_INSTANTIATE_SSL(double)

#undef MAST_INSTANTIATE_SSL

}  // namespace mast
