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

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <utility>

#include "mast/tensor.hpp"

namespace mast {

namespace {

template <class S>
using NodePtr = std::shared_ptr<detail::Node<S>>;

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapC = Eigen::Map<const EMat<S>>;
template <class S>
using MapM = Eigen::Map<EMat<S>>;

template <class S>
void require_defined(const TensorT<S>& t, const char* op) {
  if (!t.defined()) {
    throw ArgumentError(std::string(op) + ": undefined (empty) tensor input");
  }
}

template <class S>
NodePtr<S> new_node(Shape shape, const char* op) {
  auto n = std::make_shared<detail::Node<S>>();
  n->value.assign(static_cast<size_t>(numel(shape)), S(0));
  n->shape = std::move(shape);
  n->op = op;
  return n;
}

// Debug-only invariant: finite inputs under valid preconditions never yield
// non-finite outputs.
template <class S>
void check_finite_debug(const NodePtr<S>& n) {
#ifndef NDEBUG
  for (S v : n->value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(n->op) + " produced a non-finite value");
    }
  }
#else
  (void)n;
#endif
}

template <class S, class Fn>
TensorT<S> finish(NodePtr<S> n, std::initializer_list<TensorT<S>> inputs,
                  Fn&& pullback) {
  check_finite_debug(n);
  bool tracked = false;
  for (const auto& t : inputs) tracked = tracked || t.requires_grad();
  if (tracked) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node_ptr());
    n->pullback = std::forward<Fn>(pullback);
  }
  return TensorT<S>::from_node(std::move(n));
}

template <class S>
void axpy(std::vector<S>& dst, const std::vector<S>& src, S a) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

int rows_of(const Shape& s) {
  int64_t r = 1;
  for (size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return static_cast<int>(r);
}

}  // namespace

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = new_node<S>({m, n}, "matmul");
  MapM<S>(out->value.data(), m, n).noalias() =
      MapC<S>(a.data().data(), m, k) * MapC<S>(b.data().data(), k, n);
  return finish<S>(
      std::move(out), {a, b},
      [an = a.node_ptr(), bn = b.node_ptr(), m, k, n](const std::vector<S>& g,
                                                      GradTape<S>& tape) {
        MapC<S> gm(g.data(), m, n);
        if (an->requires_grad) {
          MapM<S>(tape.acc(an).data(), m, k).noalias() +=
              gm * MapC<S>(bn->value.data(), k, n).transpose();
        }
        if (bn->requires_grad) {
          MapM<S>(tape.acc(bn).data(), k, n).noalias() +=
              MapC<S>(an->value.data(), m, k).transpose() * gm;
        }
      });
}

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  auto out = new_node<S>(a.shape(), "add");
  for (int64_t i = 0; i < a.size(); ++i) {
    out->value[i] = a.data()[i] + b.data()[i];
  }
  return finish<S>(std::move(out), {a, b},
                   [an = a.node_ptr(), bn = b.node_ptr()](
                       const std::vector<S>& g, GradTape<S>& tape) {
                     if (an->requires_grad) axpy(tape.acc(an), g, S(1));
                     if (bn->requires_grad) axpy(tape.acc(bn), g, S(1));
                   });
}

template <class S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& bias) {
  require_defined(x, "add_rowvec");
  require_defined(bias, "add_rowvec");
  const int d = x.dim(x.rank() - 1);
  if (bias.rank() != 1 || bias.dim(0) != d) {
    throw ShapeError("add_rowvec: bias " + shape_str(bias.shape()) +
                     " does not match last extent of " + shape_str(x.shape()));
  }
  const int rows = rows_of(x.shape());
  auto out = new_node<S>(x.shape(), "add_rowvec");
  for (int r = 0; r < rows; ++r) {
    const S* xr = x.data().data() + static_cast<size_t>(r) * d;
    S* o = out->value.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) o[j] = xr[j] + bias.data()[j];
  }
  return finish<S>(std::move(out), {x, bias},
                   [xn = x.node_ptr(), bn = bias.node_ptr(), rows, d](
                       const std::vector<S>& g, GradTape<S>& tape) {
                     if (xn->requires_grad) axpy(tape.acc(xn), g, S(1));
                     if (bn->requires_grad) {
                       auto& gb = tape.acc(bn);
                       for (int r = 0; r < rows; ++r) {
                         const S* gr = g.data() + static_cast<size_t>(r) * d;
                         for (int j = 0; j < d; ++j) gb[j] += gr[j];
                       }
                     }
                   });
}

template <class S>
TensorT<S> scale(const TensorT<S>& x, S c) {
  require_defined(x, "scale");
  auto out = new_node<S>(x.shape(), "scale");
  for (int64_t i = 0; i < x.size(); ++i) out->value[i] = c * x.data()[i];
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), c](const std::vector<S>& g,
                                          GradTape<S>& tape) {
                     if (xn->requires_grad) axpy(tape.acc(xn), g, c);
                   });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  auto out = new_node<S>(a.shape(), "mul");
  for (int64_t i = 0; i < a.size(); ++i) {
    out->value[i] = a.data()[i] * b.data()[i];
  }
  return finish<S>(std::move(out), {a, b},
                   [an = a.node_ptr(), bn = b.node_ptr()](
                       const std::vector<S>& g, GradTape<S>& tape) {
                     if (an->requires_grad) {
                       auto& da = tape.acc(an);
                       for (size_t i = 0; i < g.size(); ++i) {
                         da[i] += g[i] * bn->value[i];
                       }
                     }
                     if (bn->requires_grad) {
                       auto& db = tape.acc(bn);
                       for (size_t i = 0; i < g.size(); ++i) {
                         db[i] += g[i] * an->value[i];
                       }
                     }
                   });
}

template <class S>
TensorT<S> transpose(const TensorT<S>& x) {
  require_defined(x, "transpose");
  if (x.rank() != 2) {
    throw ShapeError("transpose: expected rank-2, got " +
                     shape_str(x.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  auto out = new_node<S>({n, m}, "transpose");
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out->value[static_cast<size_t>(j) * m + i] =
          x.data()[static_cast<size_t>(i) * n + j];
    }
  }
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), m, n](const std::vector<S>& g,
                                             GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (int j = 0; j < n; ++j) {
                       for (int i = 0; i < m; ++i) {
                         dx[static_cast<size_t>(i) * n + j] +=
                             g[static_cast<size_t>(j) * m + i];
                       }
                     }
                   });
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
  require_defined(x, "gelu");
  auto out = new_node<S>(x.shape(), "gelu");
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = static_cast<double>(x.data()[i]);
    out->value[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return finish<S>(
      std::move(out), {x},
      [xn = x.node_ptr()](const std::vector<S>& g, GradTape<S>& tape) {
        if (!xn->requires_grad) return;
        constexpr double kInvSqrt2 = 0.70710678118654752440;
        constexpr double kInvSqrt2Pi = 0.39894228040143267794;
        auto& dx = tape.acc(xn);
        for (size_t i = 0; i < g.size(); ++i) {
          double v = static_cast<double>(xn->value[i]);
          double d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                     v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
          dx[i] += g[i] * static_cast<S>(d);
        }
      });
}

template <class S>
TensorT<S> softmax_lastdim(const TensorT<S>& x) {
  require_defined(x, "softmax_lastdim");
  const int d = x.dim(x.rank() - 1);
  const int rows = rows_of(x.shape());
  auto out = new_node<S>(x.shape(), "softmax_lastdim");
  for (int r = 0; r < rows; ++r) {
    const S* xr = x.data().data() + static_cast<size_t>(r) * d;
    S* o = out->value.data() + static_cast<size_t>(r) * d;
    S mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    S sum = S(0);
    for (int j = 0; j < d; ++j) {
      o[j] = std::exp(xr[j] - mx);
      sum += o[j];
    }
    const S inv = S(1) / sum;
    for (int j = 0; j < d; ++j) o[j] *= inv;
  }
  // The pullback needs the probabilities; copy them so the closure does not
  // hold a reference cycle on its own node.
  std::vector<S> probs = out->value;
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), probs = std::move(probs), rows, d](
                       const std::vector<S>& g, GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (int r = 0; r < rows; ++r) {
                       const size_t off = static_cast<size_t>(r) * d;
                       S dot = S(0);
                       for (int j = 0; j < d; ++j) {
                         dot += g[off + j] * probs[off + j];
                       }
                       for (int j = 0; j < d; ++j) {
                         dx[off + j] += probs[off + j] * (g[off + j] - dot);
                       }
                     }
                   });
}

template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                      const TensorT<S>& beta, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  if (eps <= 0.0) {
    throw ArgumentError("layer_norm: eps must be positive, got " +
                        std::to_string(eps));
  }
  const int d = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 ||
      beta.dim(0) != d) {
    throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) +
                     " / beta " + shape_str(beta.shape()) +
                     " must match last extent of " + shape_str(x.shape()));
  }
  const int rows = rows_of(x.shape());
  auto out = new_node<S>(x.shape(), "layer_norm");
  std::vector<S> mean(rows), rstd(rows);
  for (int r = 0; r < rows; ++r) {
    const S* xr = x.data().data() + static_cast<size_t>(r) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = xr[j] - mu;
      var += c * c;
    }
    var /= d;
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = static_cast<S>(mu);
    rstd[r] = static_cast<S>(rs);
    S* o = out->value.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) {
      S xhat = static_cast<S>((xr[j] - mu) * rs);
      o[j] = gamma.data()[j] * xhat + beta.data()[j];
    }
  }
  return finish<S>(
      std::move(out), {x, gamma, beta},
      [xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr(),
       mean = std::move(mean), rstd = std::move(rstd), rows,
       d](const std::vector<S>& g, GradTape<S>& tape) {
        std::vector<S>* dx = xn->requires_grad ? &tape.acc(xn) : nullptr;
        std::vector<S>* dg = gn->requires_grad ? &tape.acc(gn) : nullptr;
        std::vector<S>* db = bn->requires_grad ? &tape.acc(bn) : nullptr;
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * d;
          const S* xr = xn->value.data() + off;
          if (dg || db) {
            for (int j = 0; j < d; ++j) {
              S xhat = (xr[j] - mean[r]) * rstd[r];
              if (dg) (*dg)[j] += g[off + j] * xhat;
              if (db) (*db)[j] += g[off + j];
            }
          }
          if (dx) {
            // dL/dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
            double s1 = 0.0, s2 = 0.0;
            for (int j = 0; j < d; ++j) {
              S xhat = (xr[j] - mean[r]) * rstd[r];
              S dxhat = g[off + j] * gn->value[j];
              s1 += dxhat;
              s2 += static_cast<double>(dxhat) * xhat;
            }
            s1 /= d;
            s2 /= d;
            for (int j = 0; j < d; ++j) {
              S xhat = (xr[j] - mean[r]) * rstd[r];
              S dxhat = g[off + j] * gn->value[j];
              (*dx)[off + j] += static_cast<S>(
                  rstd[r] * (dxhat - s1 - static_cast<double>(xhat) * s2));
            }
          }
        }
      });
}

template <class S>
TensorT<S> conv2d_grid(const TensorT<S>& x, const TensorT<S>& kernel,
                       int stride_t, int stride_f, int pad_t, int pad_f) {
  require_defined(x, "conv2d_grid");
  require_defined(kernel, "conv2d_grid");
  if (x.rank() != 3) {
    throw ShapeError("conv2d_grid: expected [T,F,C] input, got " +
                     shape_str(x.shape()));
  }
  if (kernel.rank() != 3 || kernel.dim(0) != x.dim(2)) {
    throw ShapeError("conv2d_grid: expected [C,kt,kf] kernel with C=" +
                     std::to_string(x.dim(2)) + ", got " +
                     shape_str(kernel.shape()));
  }
  const int T = x.dim(0), F = x.dim(1), C = x.dim(2);
  const int kt = kernel.dim(1), kf = kernel.dim(2);
  if (stride_t < 1 || stride_f < 1 || pad_t < 0 || pad_f < 0) {
    throw ArgumentError("conv2d_grid: stride must be >=1 and padding >=0");
  }
  if (kt > T + 2 * pad_t || kf > F + 2 * pad_f) {
    throw ArgumentError(
        "conv2d_grid: kernel " + std::to_string(kt) + "x" +
        std::to_string(kf) + " larger than padded input " +
        std::to_string(T + 2 * pad_t) + "x" + std::to_string(F + 2 * pad_f));
  }
  const int To = (T + 2 * pad_t - kt) / stride_t + 1;
  const int Fo = (F + 2 * pad_f - kf) / stride_f + 1;
  auto out = new_node<S>({To, Fo, C}, "conv2d_grid");
  const S* xp = x.data().data();
  const S* wp = kernel.data().data();
  for (int to = 0; to < To; ++to) {
    for (int fo = 0; fo < Fo; ++fo) {
      S* o = out->value.data() + (static_cast<size_t>(to) * Fo + fo) * C;
      for (int i = 0; i < kt; ++i) {
        const int ti = to * stride_t - pad_t + i;
        if (ti < 0 || ti >= T) continue;
        for (int j = 0; j < kf; ++j) {
          const int fj = fo * stride_f - pad_f + j;
          if (fj < 0 || fj >= F) continue;
          const S* xr = xp + (static_cast<size_t>(ti) * F + fj) * C;
          const S* wr = wp + (static_cast<size_t>(0) * kt + i) * kf + j;
          for (int c = 0; c < C; ++c) {
            o[c] += wr[static_cast<size_t>(c) * kt * kf] * xr[c];
          }
        }
      }
    }
  }
  return finish<S>(
      std::move(out), {x, kernel},
      [xn = x.node_ptr(), wn = kernel.node_ptr(), T, F, C, kt, kf, stride_t,
       stride_f, pad_t, pad_f, To, Fo](const std::vector<S>& g,
                                       GradTape<S>& tape) {
        std::vector<S>* dx = xn->requires_grad ? &tape.acc(xn) : nullptr;
        std::vector<S>* dw = wn->requires_grad ? &tape.acc(wn) : nullptr;
        if (!dx && !dw) return;
        for (int to = 0; to < To; ++to) {
          for (int fo = 0; fo < Fo; ++fo) {
            const S* go = g.data() + (static_cast<size_t>(to) * Fo + fo) * C;
            for (int i = 0; i < kt; ++i) {
              const int ti = to * stride_t - pad_t + i;
              if (ti < 0 || ti >= T) continue;
              for (int j = 0; j < kf; ++j) {
                const int fj = fo * stride_f - pad_f + j;
                if (fj < 0 || fj >= F) continue;
                const size_t xoff = (static_cast<size_t>(ti) * F + fj) * C;
                for (int c = 0; c < C; ++c) {
                  const size_t woff =
                      (static_cast<size_t>(c) * kt + i) * kf + j;
                  if (dx) (*dx)[xoff + c] += wn->value[woff] * go[c];
                  if (dw) (*dw)[woff] += xn->value[xoff + c] * go[c];
                }
              }
            }
          }
        }
      });
}

template <class S>
TensorT<S> mean_pool_rows(const TensorT<S>& x) {
  require_defined(x, "mean_pool_rows");
  if (x.rank() != 2) {
    throw ShapeError("mean_pool_rows: expected [N,D], got " +
                     shape_str(x.shape()));
  }
  const int n = x.dim(0), d = x.dim(1);
  auto out = new_node<S>({1, d}, "mean_pool_rows");
  for (int r = 0; r < n; ++r) {
    const S* xr = x.data().data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) out->value[j] += xr[j];
  }
  const S inv = S(1) / static_cast<S>(n);
  for (int j = 0; j < d; ++j) out->value[j] *= inv;
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), n, d, inv](const std::vector<S>& g,
                                                  GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (int r = 0; r < n; ++r) {
                       for (int j = 0; j < d; ++j) {
                         dx[static_cast<size_t>(r) * d + j] += g[j] * inv;
                       }
                     }
                   });
}

template <class S>
TensorT<S> sum_all(const TensorT<S>& x) {
  require_defined(x, "sum_all");
  auto out = new_node<S>({1}, "sum_all");
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  out->value[0] = static_cast<S>(acc);
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr()](const std::vector<S>& g,
                                       GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (size_t i = 0; i < dx.size(); ++i) dx[i] += g[0];
                   });
}

template <class S>
TensorT<S> gather_rows(const TensorT<S>& table, const std::vector<int>& idx) {
  require_defined(table, "gather_rows");
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: expected [R,D] table, got " +
                     shape_str(table.shape()));
  }
  if (idx.empty()) throw ArgumentError("gather_rows: empty index list");
  const int R = table.dim(0), d = table.dim(1);
  for (int i : idx) {
    if (i < 0 || i >= R) {
      throw ArgumentError("gather_rows: index " + std::to_string(i) +
                          " out of range [0," + std::to_string(R) + ")");
    }
  }
  const int n = static_cast<int>(idx.size());
  auto out = new_node<S>({n, d}, "gather_rows");
  for (int r = 0; r < n; ++r) {
    std::memcpy(out->value.data() + static_cast<size_t>(r) * d,
                table.data().data() + static_cast<size_t>(idx[r]) * d,
                sizeof(S) * static_cast<size_t>(d));
  }
  return finish<S>(std::move(out), {table},
                   [tn = table.node_ptr(), idx, d](const std::vector<S>& g,
                                                   GradTape<S>& tape) {
                     if (!tn->requires_grad) return;
                     auto& dt = tape.acc(tn);
                     for (size_t r = 0; r < idx.size(); ++r) {
                       const size_t src = r * d;
                       const size_t dst = static_cast<size_t>(idx[r]) * d;
                       for (int j = 0; j < d; ++j) dt[dst + j] += g[src + j];
                     }
                   });
}

template <class S>
TensorT<S> scatter_rows(const TensorT<S>& x, const std::vector<int>& idx,
                        int rows) {
  require_defined(x, "scatter_rows");
  if (x.rank() != 2) {
    throw ShapeError("scatter_rows: expected [n,D] input, got " +
                     shape_str(x.shape()));
  }
  if (static_cast<int>(idx.size()) != x.dim(0)) {
    throw ArgumentError("scatter_rows: index count " +
                        std::to_string(idx.size()) + " != rows of input " +
                        std::to_string(x.dim(0)));
  }
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= rows || (i > 0 && idx[i] <= idx[i - 1])) {
      throw ArgumentError(
          "scatter_rows: indices must be strictly increasing in [0," +
          std::to_string(rows) + ")");
    }
  }
  const int d = x.dim(1);
  auto out = new_node<S>({rows, d}, "scatter_rows");
  for (size_t r = 0; r < idx.size(); ++r) {
    std::memcpy(out->value.data() + static_cast<size_t>(idx[r]) * d,
                x.data().data() + r * d, sizeof(S) * static_cast<size_t>(d));
  }
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), idx, d](const std::vector<S>& g,
                                               GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (size_t r = 0; r < idx.size(); ++r) {
                       const size_t src = static_cast<size_t>(idx[r]) * d;
                       for (int j = 0; j < d; ++j) {
                         dx[r * d + j] += g[src + j];
                       }
                     }
                   });
}

template <class S>
TensorT<S> take_along_lastdim(const TensorT<S>& x, const std::vector<int>& idx,
                              int m) {
  require_defined(x, "take_along_lastdim");
  if (x.rank() != 2) {
    throw ShapeError("take_along_lastdim: expected [L,R] input, got " +
                     shape_str(x.shape()));
  }
  const int L = x.dim(0), R = x.dim(1);
  if (m <= 0 || static_cast<int64_t>(idx.size()) !=
                    static_cast<int64_t>(L) * m) {
    throw ArgumentError("take_along_lastdim: index list size " +
                        std::to_string(idx.size()) + " != L*m");
  }
  for (int i : idx) {
    if (i < 0 || i >= R) {
      throw ArgumentError("take_along_lastdim: index " + std::to_string(i) +
                          " out of range [0," + std::to_string(R) + ")");
    }
  }
  auto out = new_node<S>({L, m}, "take_along_lastdim");
  for (int r = 0; r < L; ++r) {
    for (int j = 0; j < m; ++j) {
      out->value[static_cast<size_t>(r) * m + j] =
          x.data()[static_cast<size_t>(r) * R +
                   idx[static_cast<size_t>(r) * m + j]];
    }
  }
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), idx, m, R](const std::vector<S>& g,
                                                  GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     const int L = static_cast<int>(g.size()) / m;
                     for (int r = 0; r < L; ++r) {
                       for (int j = 0; j < m; ++j) {
                         dx[static_cast<size_t>(r) * R +
                            idx[static_cast<size_t>(r) * m + j]] +=
                             g[static_cast<size_t>(r) * m + j];
                       }
                     }
                   });
}

template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  int d = -1, total = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_rows");
    if (p.rank() != 2) {
      throw ShapeError("concat_rows: expected rank-2 parts, got " +
                       shape_str(p.shape()));
    }
    if (d < 0) d = p.dim(1);
    if (p.dim(1) != d) {
      throw ShapeError("concat_rows: column mismatch " +
                       shape_str(p.shape()) + " vs [*x" + std::to_string(d) +
                       "]");
    }
    total += p.dim(0);
  }
  auto out = new_node<S>({total, d}, "concat_rows");
  size_t off = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    std::memcpy(out->value.data() + off, p.data().data(),
                sizeof(S) * p.data().size());
    off += p.data().size();
    tracked = tracked || p.requires_grad();
  }
  check_finite_debug(out);
  if (!tracked) return TensorT<S>::from_node(std::move(out));
  out->requires_grad = true;
  std::vector<NodePtr<S>> ps;
  ps.reserve(parts.size());
  for (const auto& p : parts) ps.push_back(p.node_ptr());
  out->parents = ps;
  out->pullback = [ps](const std::vector<S>& g, GradTape<S>& tape) {
    size_t off = 0;
    for (const auto& pn : ps) {
      const size_t len = pn->value.size();
      if (pn->requires_grad) {
        auto& dp = tape.acc(pn);
        for (size_t i = 0; i < len; ++i) dp[i] += g[off + i];
      }
      off += len;
    }
  };
  return TensorT<S>::from_node(std::move(out));
}

template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  int n = -1, dtotal = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (p.rank() != 2) {
      throw ShapeError("concat_cols: expected rank-2 parts, got " +
                       shape_str(p.shape()));
    }
    if (n < 0) n = p.dim(0);
    if (p.dim(0) != n) {
      throw ShapeError("concat_cols: row mismatch at " + shape_str(p.shape()));
    }
    dtotal += p.dim(1);
  }
  auto out = new_node<S>({n, dtotal}, "concat_cols");
  int coff = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    const int d = p.dim(1);
    for (int r = 0; r < n; ++r) {
      std::memcpy(out->value.data() + static_cast<size_t>(r) * dtotal + coff,
                  p.data().data() + static_cast<size_t>(r) * d,
                  sizeof(S) * static_cast<size_t>(d));
    }
    coff += d;
    tracked = tracked || p.requires_grad();
  }
  check_finite_debug(out);
  if (!tracked) return TensorT<S>::from_node(std::move(out));
  out->requires_grad = true;
  std::vector<NodePtr<S>> ps;
  for (const auto& p : parts) ps.push_back(p.node_ptr());
  out->parents = ps;
  out->pullback = [ps, n, dtotal](const std::vector<S>& g, GradTape<S>& tape) {
    int coff = 0;
    for (const auto& pn : ps) {
      const int d = pn->shape[1];
      if (pn->requires_grad) {
        auto& dp = tape.acc(pn);
        for (int r = 0; r < n; ++r) {
          for (int j = 0; j < d; ++j) {
            dp[static_cast<size_t>(r) * d + j] +=
                g[static_cast<size_t>(r) * dtotal + coff + j];
          }
        }
      }
      coff += d;
    }
  };
  return TensorT<S>::from_node(std::move(out));
}

template <class S>
TensorT<S> slice_cols(const TensorT<S>& x, int c0, int c1) {
  require_defined(x, "slice_cols");
  if (x.rank() != 2) {
    throw ShapeError("slice_cols: expected rank-2, got " +
                     shape_str(x.shape()));
  }
  const int n = x.dim(0), d = x.dim(1);
  if (c0 < 0 || c1 > d || c0 >= c1) {
    throw ArgumentError("slice_cols: bad range [" + std::to_string(c0) + "," +
                        std::to_string(c1) + ") for width " +
                        std::to_string(d));
  }
  const int w = c1 - c0;
  auto out = new_node<S>({n, w}, "slice_cols");
  for (int r = 0; r < n; ++r) {
    std::memcpy(out->value.data() + static_cast<size_t>(r) * w,
                x.data().data() + static_cast<size_t>(r) * d + c0,
                sizeof(S) * static_cast<size_t>(w));
  }
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr(), n, d, c0, w](const std::vector<S>& g,
                                                    GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     auto& dx = tape.acc(xn);
                     for (int r = 0; r < n; ++r) {
                       for (int j = 0; j < w; ++j) {
                         dx[static_cast<size_t>(r) * d + c0 + j] +=
                             g[static_cast<size_t>(r) * w + j];
                       }
                     }
                   });
}

template <class S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape) {
  require_defined(x, "reshape");
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  auto out = new_node<S>(std::move(shape), "reshape");
  out->value = std::vector<S>(x.data().begin(), x.data().end());
  return finish<S>(std::move(out), {x},
                   [xn = x.node_ptr()](const std::vector<S>& g,
                                       GradTape<S>& tape) {
                     if (!xn->requires_grad) return;
                     axpy(tape.acc(xn), g, S(1));
                   });
}

template <class S>
TensorT<S> l2_normalize_rows(const TensorT<S>& x) {
  require_defined(x, "l2_normalize_rows");
  if (x.rank() != 2) {
    throw ShapeError("l2_normalize_rows: expected rank-2, got " +
                     shape_str(x.shape()));
  }
  const int n = x.dim(0), d = x.dim(1);
  auto out = new_node<S>(x.shape(), "l2_normalize_rows");
  std::vector<S> inv_norm(n);
  for (int r = 0; r < n; ++r) {
    const S* xr = x.data().data() + static_cast<size_t>(r) * d;
    double sq = 0.0;
    for (int j = 0; j < d; ++j) sq += static_cast<double>(xr[j]) * xr[j];
    const double norm = std::max(std::sqrt(sq), 1e-12);
    inv_norm[r] = static_cast<S>(1.0 / norm);
    S* o = out->value.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) o[j] = xr[j] * inv_norm[r];
  }
  return finish<S>(
      std::move(out), {x},
      [xn = x.node_ptr(), inv_norm = std::move(inv_norm), n,
       d](const std::vector<S>& g, GradTape<S>& tape) {
        if (!xn->requires_grad) return;
        auto& dx = tape.acc(xn);
        for (int r = 0; r < n; ++r) {
          const size_t off = static_cast<size_t>(r) * d;
          const S* xr = xn->value.data() + off;
          double dot = 0.0;  // g . y
          for (int j = 0; j < d; ++j) {
            dot += static_cast<double>(g[off + j]) * xr[j] * inv_norm[r];
          }
          for (int j = 0; j < d; ++j) {
            const double y = static_cast<double>(xr[j]) * inv_norm[r];
            dx[off + j] +=
                static_cast<S>((g[off + j] - y * dot) * inv_norm[r]);
          }
        }
      });
}

template <class S>
TensorT<S> cross_entropy(const TensorT<S>& logits,
                         const std::vector<int>& labels) {
  require_defined(logits, "cross_entropy");
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: expected [N,C] logits, got " +
                     shape_str(logits.shape()));
  }
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ArgumentError("cross_entropy: label count " +
                        std::to_string(labels.size()) + " != rows " +
                        std::to_string(n));
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw ArgumentError("cross_entropy: label " + std::to_string(y) +
                          " out of range [0," + std::to_string(c) + ")");
    }
  }
  auto out = new_node<S>({1}, "cross_entropy");
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    const S* lr = logits.data().data() + static_cast<size_t>(r) * c;
    double mx = lr[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(lr[j]));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(lr[j] - mx);
    total += std::log(sum) - (lr[labels[r]] - mx);
  }
  out->value[0] = static_cast<S>(total / n);
  return finish<S>(
      std::move(out), {logits},
      [ln = logits.node_ptr(), labels, n, c](const std::vector<S>& g,
                                             GradTape<S>& tape) {
        if (!ln->requires_grad) return;
        auto& dl = tape.acc(ln);
        const double gs = static_cast<double>(g[0]) / n;
        for (int r = 0; r < n; ++r) {
          const size_t off = static_cast<size_t>(r) * c;
          const S* lr = ln->value.data() + off;
          double mx = lr[0];
          for (int j = 1; j < c; ++j) {
            mx = std::max(mx, static_cast<double>(lr[j]));
          }
          double sum = 0.0;
          for (int j = 0; j < c; ++j) sum += std::exp(lr[j] - mx);
          for (int j = 0; j < c; ++j) {
            double p = std::exp(lr[j] - mx) / sum;
            dl[off + j] += static_cast<S>(
                gs * (p - (j == labels[r] ? 1.0 : 0.0)));
          }
        }
      });
}

// Explicit instantiation for the training scalar and the gradient-check
// replica.
#define MAST_INSTANTIATE_OPS(S)                                             \
  template TensorT<S> matmul(const TensorT<S>&, const TensorT<S>&);         \
  template TensorT<S> add(const TensorT<S>&, const TensorT<S>&);            \
  template TensorT<S> add_rowvec(const TensorT<S>&, const TensorT<S>&);     \
  template TensorT<S> scale(const TensorT<S>&, S);                          \
  template TensorT<S> mul(const TensorT<S>&, const TensorT<S>&);            \
  template TensorT<S> transpose(const TensorT<S>&);                         \
  template TensorT<S> gelu(const TensorT<S>&);                              \
  template TensorT<S> softmax_lastdim(const TensorT<S>&);                   \
  template TensorT<S> layer_norm(const TensorT<S>&, const TensorT<S>&,      \
                                 const TensorT<S>&, double);                \
  template TensorT<S> conv2d_grid(const TensorT<S>&, const TensorT<S>&,     \
                                  int, int, int, int);                      \
  template TensorT<S> mean_pool_rows(const TensorT<S>&);                    \
  template TensorT<S> sum_all(const TensorT<S>&);                           \
  template TensorT<S> gather_rows(const TensorT<S>&,                        \
                                  const std::vector<int>&);                 \
  template TensorT<S> scatter_rows(const TensorT<S>&,                       \
                                   const std::vector<int>&, int);           \
  template TensorT<S> take_along_lastdim(const TensorT<S>&,                 \
                                         const std::vector<int>&, int);     \
  template TensorT<S> concat_rows(const std::vector<TensorT<S>>&);          \
  template TensorT<S> concat_cols(const std::vector<TensorT<S>>&);          \
  template TensorT<S> slice_cols(const TensorT<S>&, int, int);              \
  template TensorT<S> reshape(const TensorT<S>&, Shape);                    \
  template TensorT<S> l2_normalize_rows(const TensorT<S>&);                 \
  template TensorT<S> cross_entropy(const TensorT<S>&,                      \
                                    const std::vector<int>&);

MAST_INSTANTIATE_OPS(float)
MAST_INSTANTIATE_OPS(double)

#undef MAST_INSTANTIATE_OPS

}  // namespace mast
