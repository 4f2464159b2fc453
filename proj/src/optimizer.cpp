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

#include "mast/optimizer.hpp"

#include <cmath>

namespace mast {

AdamW::AdamW(const Params& params, AdamConfig cfg) : cfg_(cfg) {
  if (cfg.lr < 0.0) throw ConfigError("optimizer: lr must not be negative");
  m_.resize(params.size());
  v_.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params.tensor(i).size()), 0.0f);
    v_[i].assign(static_cast<size_t>(params.tensor(i).size()), 0.0f);
  }
}

void AdamW::step(Params& params, double lr_now) {
  if (params.size() != m_.size()) {
    throw StateError("optimizer: parameter tree changed size");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& t = params.tensor(i);
    if (!t.has_grad()) continue;  // parameter unused this step
    auto w = t.data_mut();
    auto g = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = static_cast<float>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj);
      v[j] = static_cast<float>(cfg_.beta2 * v[j] +
                                (1.0 - cfg_.beta2) * gj * gj);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      const double update =
          mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[j];
      w[j] = static_cast<float>(w[j] - lr_now * update);
    }
  }
}

double cosine_lr(double base, int64_t step, int64_t total) {
  if (total <= 0) return base;
  const double x = std::min(1.0, static_cast<double>(step) / total);
  return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * x));
}

void merge_grad_sinks(Params& params, const std::vector<GradSink>& sinks) {
  // Iterate parameters in tree order and sinks in chunk order; never iterate
  // the unordered maps themselves, their order is not deterministic.
  for (const auto& sink : sinks) {
    for (size_t i = 0; i < params.size(); ++i) {
      auto& t = params.tensor(i);
      auto it = sink.find(t.node());
      if (it == sink.end()) continue;
      if (!t.has_grad()) t.zero_grad();
      auto g = t.grad_mut();
      const auto& add = it->second;
      for (size_t j = 0; j < add.size(); ++j) g[j] += add[j];
    }
  }
}

}  // namespace mast
