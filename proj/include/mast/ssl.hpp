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

#ifndef MAST_SSL_HPP_
#define MAST_SSL_HPP_

#include <vector>

#include "mast/augment.hpp"
#include "mast/model.hpp"
#include "mast/optimizer.hpp"

namespace mast {

struct SslConfig {
  double tau = 0.07;
  double momentum = 0.99;
  double patch_drop = 0.2;
  int proj_dim = 256;
};

// InfoNCE over a row of similarity logits: positives sit on the diagonal,
// the other N-1 rows of z_other act as negatives (no queue), and the loss is
// the mean over anchors of -log softmax(row)[diagonal]. Rows are expected to
// be L2-normalized by the caller; gradients flow into whichever side is
// tracked.
template <class S>
TensorT<S> info_nce(const TensorT<S>& z_anchor, const TensorT<S>& z_other,
                    double tau);

// Same loss given a precomputed [N, N] similarity matrix. tau only divides
// the similarities, so info_nce_from_similarities(scale(sims, 1/tau), 1)
// is bitwise identical to info_nce_from_similarities(sims, tau).
template <class S>
TensorT<S> info_nce_from_similarities(const TensorT<S>& sims, double tau);

// info_nce(f, h) + info_nce(h, f); symmetric in value by construction.
template <class S>
TensorT<S> symmetric_loss(const TensorT<S>& f_out, const TensorT<S>& h_out,
                          double tau);

// Linear map final_dim -> proj_dim appended as "proj/w" / "proj/b".
void attach_projection_head(Params& params, int final_dim, int proj_dim,
                            uint64_t seed);

// Gradient-free full copy of the student tree, updated only by EMA.
struct TeacherState {
  Params params;
  float momentum = 0.99f;
};
TeacherState make_teacher(const Params& student, double momentum);

// theta_t <- m * theta_t + (1 - m) * theta_s, elementwise over the tree.
void ema_update(Params& teacher, const Params& student, float m);
inline void ema_update(TeacherState& teacher, const Params& student) {
  ema_update(teacher.params, student, teacher.momentum);
}

// Patchify + optional patch-drop + encoder + mean pool + projection head +
// L2 normalization -> [1, proj_dim]. Tracked iff the parameters are.
Tensor encode_projected(const ModelConfig& cfg, const Params& params,
                        const Spectrogram& view, double drop_j,
                        Rng* drop_rng);

// One pretraining step: per sample draw two views (RRC, then mixup with an
// in-batch partner, then patch-drop after patchify on both views), student
// forwards view a, teacher forwards view b without gradient, symmetric
// cross-contrastive loss, backward, optimizer step, EMA update. rng seeds
// all augmentation; results are independent of the worker count.
struct PretrainStepStats {
  float loss = 0.0f;
};
PretrainStepStats pretrain_step(const ModelConfig& cfg, const SslConfig& ssl,
                                const std::vector<const Spectrogram*>& batch,
                                Params& student, TeacherState& teacher,
                                AdamW& opt, double lr_now, Rng rng);

}  // namespace mast

#endif  // MAST_SSL_HPP_
