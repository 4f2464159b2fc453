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

#ifndef MAST_GRADCHECK_HPP_
#define MAST_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "mast/tensor.hpp"

namespace mast {

struct GradReport {
  std::string op_name;
  double max_rel_err = 0.0;
  std::vector<double> per_input_err;
  bool passed = false;
};

// Central-difference gradient check of a scalar-valued tensor function
// against its reverse-mode gradients.
//
// f must be deterministic (verified by evaluating it twice; a mismatch
// raises OracleError) and return a scalar. Per coordinate the relative
// error is |analytic - fd| / max(floor, |analytic|, |fd|); the report
// passes iff the max over all inputs is <= tol.
//
// Meant to run on the double instantiation: the float engine shares the
// same op code, so checking the 64-bit replica validates the formulas while
// keeping finite differences out of float32 noise. The float instantiation
// exists for coarse end-to-end checks with a larger floor.
template <class S>
GradReport finite_diff_check(
    const std::string& op_name,
    const std::function<TensorT<S>(const std::vector<TensorT<S>>&)>& f,
    const std::vector<TensorT<S>>& inputs, double tol, double step,
    double floor = 1e-6);

}  // namespace mast

#endif  // MAST_GRADCHECK_HPP_
