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

#ifndef MAST_TRAINER_HPP_
#define MAST_TRAINER_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "mast/config.hpp"
#include "mast/synth.hpp"

namespace mast {

struct Dataset {
  std::vector<Spectrogram> specs;
  std::vector<int> labels;

  int size() const { return static_cast<int>(specs.size()); }
};

// Reads feature files listed by the manifest. Labels are range-checked
// against num_classes unless it is negative (pretraining does not need
// labels).
Dataset load_dataset(const std::string& features_dir,
                     const std::string& manifest_path, int num_classes);

// Forward + backward over one labeled batch in fixed chunks, accumulating
// into the parameters' .grad. Loss is the batch mean cross-entropy.
struct StepStats {
  double loss = 0.0;
  int correct = 0;
};
StepStats supervised_batch(const ModelConfig& cfg, Params& params,
                           const Dataset& ds, const std::vector<int>& idx);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const ModelConfig& cfg, Params& params, const Dataset& ds);

// Frozen-encoder mean-pooled features, one row per sample.
std::vector<std::vector<float>> extract_features(const ModelConfig& cfg,
                                                 Params& params,
                                                 const Dataset& ds);

struct TrainResult {
  double final_train_loss = 0.0;
  double eval_accuracy = -1.0;  // -1 when no eval manifest was given
  int64_t steps = 0;
};
TrainResult run_train(const RunConfig& rc);

struct PretrainResult {
  float first_loss = 0.0f;
  float last_loss = 0.0f;
  int64_t steps = 0;
};
PretrainResult run_pretrain(const RunConfig& rc);

struct ProbeResult {
  double accuracy = 0.0;
};
ProbeResult run_probe(const RunConfig& rc);

EvalResult run_eval(const RunConfig& rc);

// Aligned table plus machine-readable `stage,i,tokens,gt,gf,dim` lines.
void print_shape_plan(const ModelConfig& cfg, std::ostream& out);

void cmd_gen_synth(const std::string& out_dir, int n, uint64_t seed,
                   float noise_sigma = 0.3f);
void cmd_featurize(const std::string& wav_dir, const std::string& out_dir,
                   int mel_bins = 64);

}  // namespace mast

#endif  // MAST_TRAINER_HPP_
