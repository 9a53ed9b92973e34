// Copyright 2026 The Aggbag Authors. All Rights Reserved.
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

#ifndef AGGBAG_SEMILINEAR_LOSS_HPP_
#define AGGBAG_SEMILINEAR_LOSS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>

#include "aggbag/common.hpp"

namespace aggbag {

enum class LossKind { kMse, kLogLoss, kPoisson, kCustom };

// l(y, yhat) = b(yhat) - T(y)^T yhat + c(y).
//
// Only grad_b and T enter gradients; c is kept so reported loss values match the
// canonical definitions. A custom loss supplies all four callables; nothing
// checks that grad_b is the gradient of b.
struct SemilinearLoss {
  using ScalarFn = std::function<double(std::span<const double>)>;
  using VectorFn = std::function<Vector(std::span<const double>)>;

  LossKind kind = LossKind::kCustom;
  std::string name;
  ScalarFn b;
  VectorFn grad_b;
  VectorFn transform;
  ScalarFn c;
  bool requires_one_hot = false;
};

inline double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline Vector softmax(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (out[i] = std::exp(v[i] - mx));
  for (double& x : out) x /= s;
  return out;
}

namespace detail {
inline Vector identity(std::span<const double> y) { return {y.begin(), y.end()}; }
}  // namespace detail

inline SemilinearLoss mse_loss() {
  SemilinearLoss sl;
  sl.kind = LossKind::kMse;
  sl.name = "mse";
  sl.b = [](std::span<const double> yh) { return 0.5 * squared_norm(yh); };
  sl.grad_b = detail::identity;
  sl.transform = detail::identity;
  sl.c = [](std::span<const double> y) { return 0.5 * squared_norm(y); };
  return sl;
}

inline SemilinearLoss log_loss() {
  SemilinearLoss sl;
  sl.kind = LossKind::kLogLoss;
  sl.name = "logloss";
  sl.b = log_sum_exp;
  sl.grad_b = softmax;
  sl.transform = detail::identity;
  sl.c = [](std::span<const double>) { return 0.0; };
  sl.requires_one_hot = true;
  return sl;
}

// K = 1 only; vector arguments of other widths are rejected by loss().
inline SemilinearLoss poisson_loss() {
  SemilinearLoss sl;
  sl.kind = LossKind::kPoisson;
  sl.name = "poisson";
  sl.b = [](std::span<const double> yh) {
    double s = 0.0;
    for (double x : yh) s += std::exp(x);
    return s;
  };
  sl.grad_b = [](std::span<const double> yh) {
    Vector g(yh.size());
    std::transform(yh.begin(), yh.end(), g.begin(), [](double x) { return std::exp(x); });
    return g;
  };
  sl.transform = detail::identity;
  sl.c = [](std::span<const double>) { return 0.0; };
  return sl;
}

inline SemilinearLoss loss_by_name(std::string_view name) {
  if (name == "mse") return mse_loss();
  if (name == "logloss") return log_loss();
  if (name == "poisson") return poisson_loss();
  throw Error("unknown loss '" + std::string(name) + "' (expected mse, logloss or poisson)");
}

inline bool is_one_hot(std::span<const double> y) {
  std::size_t ones = 0;
  for (double v : y) {
    if (v == 1.0) ++ones;
    else if (v != 0.0) return false;
  }
  return ones == 1;
}

inline double loss(const SemilinearLoss& sl, std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw Error(sl.name + ": label/prediction width mismatch");
  if (sl.kind == LossKind::kPoisson && yhat.size() != 1) throw Error("poisson: K must be 1");
  if (sl.requires_one_hot && !is_one_hot(y)) throw Error(sl.name + ": label must be one-hot");
  const Vector t = sl.transform(y);
  double lin = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) lin += t[k] * yhat[k];
  return sl.b(yhat) - lin + sl.c(y);
}

inline Vector grad_b_eval(const SemilinearLoss& sl, std::span<const double> yhat) { return sl.grad_b(yhat); }

}  // namespace aggbag

#endif  // AGGBAG_SEMILINEAR_LOSS_HPP_
