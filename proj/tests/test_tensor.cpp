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

#include "mast/gradcheck.hpp"
#include "mast/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mast;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand arithmetic") {
  std::vector<float> id(9, 0.0f);
  id[0] = id[4] = id[8] = 1.0f;
  auto eye = Tensor::from_data({3, 3}, id);
  Rng rng(1);
  auto b = random_tensor<float>({3, 4}, rng);
  auto prod = matmul(eye, b);
  for (int64_t i = 0; i < b.size(); ++i) {
    CHECK(prod.data()[i] == b.data()[i]);
  }

  auto a = Tensor::from_data({1, 2}, {1.0f, 2.0f});
  auto c = Tensor::from_data({2, 1}, {3.0f, 4.0f});
  CHECK(matmul(a, c).item() == doctest::Approx(11.0f));
}

TEST_CASE("matmul matches the naive triple-loop oracle") {
  Rng rng(2);
  auto a = random_tensor<float>({5, 7}, rng);
  auto b = random_tensor<float>({7, 3}, rng);
  auto c = matmul(a, b);
  auto ref = oracles::naive_matmul(
      std::vector<float>(a.data().begin(), a.data().end()),
      std::vector<float>(b.data().begin(), b.data().end()), 5, 7, 3);
  for (int64_t i = 0; i < c.size(); ++i) {
    CHECK(std::fabs(c.data()[i] - ref[i]) <= 1e-6);
  }
}

TEST_CASE("matmul names both shapes on mismatch") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    CHECK_MESSAGE(false, "expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("softmax symmetry, stability and 64-bit oracle") {
  auto sym = softmax_lastdim(Tensor::from_data({3}, {0.0f, 0.0f, 0.0f}));
  for (float v : sym.data()) CHECK(v == doctest::Approx(1.0f / 3));

  auto big = softmax_lastdim(Tensor::from_data({2}, {1000.0f, 1000.0f}));
  CHECK(big.data()[0] == doctest::Approx(0.5f));
  CHECK(big.data()[1] == doctest::Approx(0.5f));
  for (float v : big.data()) CHECK(std::isfinite(v));

  auto x = softmax_lastdim(Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}));
  auto ref = oracles::softmax64({1.0, 2.0, 3.0});
  for (int i = 0; i < 3; ++i) {
    CHECK(std::fabs(x.data()[i] - ref[i]) <= 1e-6);
  }

  CHECK_THROWS_AS(softmax_lastdim(Tensor()), ArgumentError);
}

TEST_CASE("softmax rows sum to one for random finite inputs") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int rows = rng.uniform_int(1, 6);
    const int d = rng.uniform_int(1, 9);
    auto x = random_tensor<float>({rows, d}, rng, 10.0);
    auto y = softmax_lastdim(x);
    for (int r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (int j = 0; j < d; ++j) {
        sum += y.data()[static_cast<size_t>(r) * d + j];
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("layer_norm edge cases and statistics") {
  auto gamma = Tensor::full({4}, 1.0f);
  auto beta = Tensor::zeros({4});
  auto constant = Tensor::full({2, 4}, 3.25f);
  auto y = layer_norm(constant, gamma, beta, 1e-5);
  for (float v : y.data()) CHECK(std::fabs(v) <= 1e-6);

  Rng rng(4);
  auto x = random_tensor<float>({3, 4}, rng);
  auto beta2 = random_tensor<float>({4}, rng);
  auto zero_gamma = Tensor::zeros({4});
  auto yb = layer_norm(x, zero_gamma, beta2, 1e-5);
  for (int r = 0; r < 3; ++r) {
    for (int j = 0; j < 4; ++j) {
      CHECK(yb.data()[static_cast<size_t>(r) * 4 + j] ==
            doctest::Approx(beta2.data()[j]));
    }
  }

  auto xr = random_tensor<float>({5, 16}, rng, 3.0);
  auto yr = layer_norm(xr, Tensor::full({16}, 1.0f), Tensor::zeros({16}),
                       1e-6);
  for (int r = 0; r < 5; ++r) {
    double mu = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mu += yr.data()[r * 16 + j];
    mu /= 16;
    for (int j = 0; j < 16; ++j) {
      const double c = yr.data()[r * 16 + j] - mu;
      var += c * c;
    }
    var /= 16;
    CHECK(std::fabs(mu) <= 1e-5);
    CHECK(std::fabs(var - 1.0) <= 1e-3);
  }

  CHECK_THROWS_AS(layer_norm(xr, Tensor::full({16}, 1.0f),
                             Tensor::zeros({16}), 0.0),
                  ArgumentError);
}

TEST_CASE("conv2d_grid output extents follow the closed-form length") {
  // 16 with k=3, p=1, s=2 per axis pools to 8
  auto x = Tensor::full({16, 16, 1}, 1.0f);
  auto k = Tensor::full({1, 3, 3}, 1.0f / 9);
  auto y = conv2d_grid(x, k, 2, 2, 1, 1);
  CHECK(y.dim(0) == 8);
  CHECK(y.dim(1) == 8);

  // 1x1 kernel with unit weight is the identity
  Rng rng(5);
  auto xr = random_tensor<float>({5, 4, 3}, rng);
  auto ident = Tensor::full({3, 1, 1}, 1.0f);
  auto yi = conv2d_grid(xr, ident, 1, 1, 0, 0);
  for (int64_t i = 0; i < xr.size(); ++i) {
    CHECK(yi.data()[i] == xr.data()[i]);
  }

  // randomized (L, k, s, p): actual extents equal the formula
  for (int rep = 0; rep < 200; ++rep) {
    const int L = rng.uniform_int(1, 24);
    const int F = rng.uniform_int(1, 24);
    const int kt = rng.uniform_int(1, 5);
    const int kf = rng.uniform_int(1, 5);
    const int st = rng.uniform_int(1, 4);
    const int sf = rng.uniform_int(1, 4);
    const int pt = rng.uniform_int(0, kt - 1);
    const int pf = rng.uniform_int(0, kf - 1);
    if (L + 2 * pt < kt || F + 2 * pf < kf) continue;
    auto xi = random_tensor<float>({L, F, 1}, rng);
    auto ki = random_tensor<float>({1, kt, kf}, rng);
    auto yo = conv2d_grid(xi, ki, st, sf, pt, pf);
    CHECK(yo.dim(0) == (L + 2 * pt - kt) / st + 1);
    CHECK(yo.dim(1) == (F + 2 * pf - kf) / sf + 1);
  }

  CHECK_THROWS_AS(
      conv2d_grid(Tensor::zeros({2, 2, 1}), Tensor::zeros({1, 5, 5}), 1, 1,
                  1, 1),
      ArgumentError);
}

TEST_CASE("backward populates tracked ancestors") {
  auto x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  sum_all(x).backward();
  for (float g : x.grad()) CHECK(g == 1.0f);

  x.zero_grad();
  sum_all(mul(x, x)).backward();
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0f * x.data()[i]));
  }
}

TEST_CASE("backward through a value used twice sums both paths") {
  auto x = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f});
  x.set_requires_grad(true);
  // y = x + x: analytically dy/dx = 2
  sum_all(add(x, x)).backward();
  for (float g : x.grad()) CHECK(g == doctest::Approx(2.0f));
}

TEST_CASE("backward requires a scalar loss") {
  auto x = Tensor::zeros({2, 2});
  x.set_requires_grad(true);
  auto y = add(x, x);
  CHECK_THROWS_AS(y.backward(), ArgumentError);
}

TEST_CASE("gradient accumulation across calls is additive until zeroed") {
  auto x = Tensor::from_data({2}, {1.0f, 2.0f});
  x.set_requires_grad(true);
  sum_all(x).backward();
  sum_all(x).backward();
  for (float g : x.grad()) CHECK(g == 2.0f);
  x.zero_grad();
  for (float g : x.grad()) CHECK(g == 0.0f);
}

TEST_CASE("finite_diff_check: linear map is exact to rounding") {
  Rng rng(6);
  auto a = random_tensor<double>({3, 3}, rng);
  auto f = [](const std::vector<Tensor64>& in) {
    return sum_all(scale(in[0], 2.5));
  };
  auto report = finite_diff_check<double>("linear", f, {a}, 1e-4, 1e-5);
  CHECK(report.passed);
  CHECK(report.max_rel_err <= 1e-8);
}

TEST_CASE("finite_diff_check: softmax on 8 values at tol 1e-4") {
  Rng rng(7);
  auto x = random_tensor<double>({2, 4}, rng);
  auto w = random_tensor<double>({2, 4}, rng).detach();
  auto f = [w](const std::vector<Tensor64>& in) {
    return sum_all(mul(softmax_lastdim(in[0]), w));
  };
  auto report = finite_diff_check<double>("softmax", f, {x}, 1e-4, 1e-5);
  CHECK(report.passed);
}

TEST_CASE("finite_diff_check: gelu near zero") {
  auto x = Tensor64::from_data({5}, {-0.2, -0.05, 0.0, 0.05, 0.2});
  auto f = [](const std::vector<Tensor64>& in) {
    return sum_all(gelu(reshape(in[0], {1, 5})));
  };
  auto report = finite_diff_check<double>("gelu", f, {x}, 1e-4, 1e-5);
  CHECK(report.passed);
}

TEST_CASE("finite_diff_check flags a non-deterministic function") {
  auto x = Tensor64::from_data({2}, {1.0, 2.0});
  int calls = 0;
  auto f = [&calls](const std::vector<Tensor64>& in) {
    return scale(sum_all(in[0]), 1.0 + 0.001 * (calls++));
  };
  CHECK_THROWS_AS(
      finite_diff_check<double>("flaky", f, {x}, 1e-4, 1e-5), OracleError);
}

TEST_CASE("every differentiable op passes the 64-bit gradient sweep") {
  auto failures = testutil::op_gradient_suite(/*shapes_per_op=*/2, 11);
  for (const auto& f : failures) {
    CAPTURE(f.op_name);
    CAPTURE(f.max_rel_err);
    CHECK(f.passed);
  }
  CHECK(failures.empty());
}

#ifndef NDEBUG
TEST_CASE("debug builds flag non-finite op outputs") {
  // log of a negative mel power cannot happen through the public frontend;
  // force a non-finite value through scale overflow instead.
  auto big = Tensor::full({2}, 3e38f);
  CHECK_THROWS_AS(scale(big, 10.0f), NumericError);
}
#endif

TEST_CASE("gather/scatter/take_along semantics") {
  auto table = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21});
  auto g = gather_rows(table, {2, 0, 2});
  CHECK(g.data()[0] == 20.0f);
  CHECK(g.data()[2] == 0.0f);
  CHECK(g.data()[4] == 20.0f);
  CHECK_THROWS_AS(gather_rows(table, {3}), ArgumentError);

  auto x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  auto s = scatter_rows(x, {0, 2}, 3);
  CHECK(s.dim(0) == 3);
  CHECK(s.data()[2] == 0.0f);  // row 1 is zero-filled
  CHECK(s.data()[4] == 3.0f);
  CHECK_THROWS_AS(scatter_rows(x, {2, 0}, 3), ArgumentError);

  auto t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto picked = take_along_lastdim(t, {2, 0, 1, 1}, 2);
  CHECK(picked.data()[0] == 3.0f);
  CHECK(picked.data()[1] == 1.0f);
  CHECK(picked.data()[2] == 5.0f);
  CHECK(picked.data()[3] == 5.0f);
}

TEST_CASE("cross_entropy closed form on one-hot certainty") {
  // logits strongly favoring the label drive the loss to ~0
  auto logits = Tensor::from_data({1, 3}, {50.0f, 0.0f, 0.0f});
  CHECK(cross_entropy(logits, {0}).item() == doctest::Approx(0.0f));
  // uniform logits over C classes give log(C)
  auto uniform = Tensor::zeros({2, 4});
  CHECK(cross_entropy(uniform, {1, 3}).item() ==
        doctest::Approx(std::log(4.0f)));
  CHECK_THROWS_AS(cross_entropy(uniform, {1, 4}), ArgumentError);
}
