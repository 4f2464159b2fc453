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

#include "mast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mast {

namespace {

template <class S>
std::vector<TensorT<S>> clone_inputs(const std::vector<TensorT<S>>& inputs,
                                     bool tracked) {
  std::vector<TensorT<S>> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) {
    auto c = t.detach();
    c.set_requires_grad(tracked);
    out.push_back(std::move(c));
  }
  return out;
}

template <class S>
S eval_scalar(
    const std::function<TensorT<S>(const std::vector<TensorT<S>>&)>& f,
    const std::vector<TensorT<S>>& inputs) {
  TensorT<S> y = f(inputs);
  if (!y.defined() || y.size() != 1) {
    throw ArgumentError("finite_diff_check: f must return a scalar");
  }
  return y.item();
}

}  // namespace

template <class S>
GradReport finite_diff_check(
    const std::string& op_name,
    const std::function<TensorT<S>(const std::vector<TensorT<S>>&)>& f,
    const std::vector<TensorT<S>>& inputs, double tol, double step,
    double floor) {
  if (inputs.empty()) {
    throw ArgumentError("finite_diff_check: no inputs");
  }
  if (step <= 0.0 || tol <= 0.0) {
    throw ArgumentError("finite_diff_check: tol and step must be positive");
  }

  // Determinism probe: two forward passes must agree bitwise.
  {
    auto a = clone_inputs(inputs, false);
    S y0 = eval_scalar(f, a);
    S y1 = eval_scalar(f, a);
    if (std::memcmp(&y0, &y1, sizeof(S)) != 0) {
      throw OracleError("finite_diff_check: f is non-deterministic on " +
                        op_name);
    }
  }

  // Analytic gradients via reverse mode.
  auto tracked = clone_inputs(inputs, true);
  {
    TensorT<S> y = f(tracked);
    if (!y.defined() || y.size() != 1) {
      throw ArgumentError("finite_diff_check: f must return a scalar");
    }
    if (!y.requires_grad()) {
      throw ArgumentError(
          "finite_diff_check: output does not depend on tracked inputs");
    }
    y.backward();
  }

  GradReport report;
  report.op_name = op_name;
  auto base = clone_inputs(inputs, false);
  for (size_t i = 0; i < inputs.size(); ++i) {
    double worst = 0.0;
    auto& probe = base[i];
    std::span<S> v = probe.data_mut();
    std::span<const S> analytic = tracked[i].grad();
    for (int64_t j = 0; j < probe.size(); ++j) {
      const S orig = v[j];
      v[j] = orig + static_cast<S>(step);
      const double up = static_cast<double>(eval_scalar(f, base));
      v[j] = orig - static_cast<S>(step);
      const double down = static_cast<double>(eval_scalar(f, base));
      v[j] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double an =
          analytic.empty() ? 0.0 : static_cast<double>(analytic[j]);
      const double denom =
          std::max({floor, std::fabs(an), std::fabs(fd)});
      worst = std::max(worst, std::fabs(an - fd) / denom);
    }
    report.per_input_err.push_back(worst);
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  report.passed = report.max_rel_err <= tol;
  return report;
}

template GradReport finite_diff_check<float>(
    const std::string&,
    const std::function<TensorT<float>(const std::vector<TensorT<float>>&)>&,
    const std::vector<TensorT<float>>&, double, double, double);
template GradReport finite_diff_check<double>(
    const std::string&,
    const std::function<TensorT<double>(const std::vector<TensorT<double>>&)>&,
    const std::vector<TensorT<double>>&, double, double, double);

}  // namespace mast
