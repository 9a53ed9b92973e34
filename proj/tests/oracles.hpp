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

#ifndef AGGBAG_TESTS_ORACLES_HPP_
#define AGGBAG_TESTS_ORACLES_HPP_

// Reference computations written independently of the library engines. They
// only use the model's lookup tables and plain arithmetic.

#include <cmath>
#include <functional>
#include <vector>

#include "aggbag/gam.hpp"
#include "aggbag/randombag.hpp"
#include "aggbag/synthetic.hpp"
#include "aggbag/train.hpp"
#include "aggbag/verify.hpp"

namespace aggbag::testing {

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& at, double h) {
  Vector g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    Vector up = at, dn = at;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

// ||a - b||_inf / ||b||_inf.
inline double norm_relative_error(const Vector& a, const Vector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0.0 ? num : num / den;
}

inline double total_loss(const GamModel& model, const Dataset& ds, const SemilinearLoss& sl) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.N(); ++i) s += loss(sl, ds.labels.row(i), forward(model, ds.features.row(i)));
  return s;
}

// Output of a model made only of LinearCross sub-models, by table lookup.
inline Vector lookup_output(const GamModel& model, std::span<const std::uint32_t> x) {
  Vector out(model.K, 0.0);
  for (const auto& sm : model.sub_models) {
    std::vector<std::uint32_t> key;
    for (std::size_t f : sm.features) key.push_back(x[f]);
    const std::size_t row = sm.combo_rows.at(key);
    for (std::size_t k = 0; k < model.K; ++k) out[k] += model.beta[sm.params[row * model.K + k]];
  }
  return out;
}

inline Vector hand_grad_b(LossKind kind, const Vector& yhat) {
  Vector g(yhat.size());
  if (kind == LossKind::kMse) return yhat;
  if (kind == LossKind::kPoisson) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::exp(yhat[k]);
    return g;
  }
  double z = 0.0;
  for (double v : yhat) z += std::exp(v);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::exp(yhat[k]) / z;
  return g;
}

// Single-feature collection, disjoint per-feature LinearCross sub-models.
// For every bag of the first collection and every parameter of sub-model 0,
// compares (df/dbeta) * ((1/m) sum b'(yhat) - ybar) with the engine's bag
// contribution divided by m. Returns the largest absolute difference.
inline double per_bag_formula_deviation(std::uint64_t seed) {
  CounterRng rng(seed, 0x9091);
  const LossKind kinds[] = {LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson};
  const LossKind kind = kinds[seed % 3];
  const std::size_t K = kind == LossKind::kLogLoss ? 2 + rng.below(2) : kind == LossKind::kMse ? 1 + rng.below(2) : 1;
  const std::vector<std::size_t> vocab{2 + rng.below(4), 2 + rng.below(4), 2 + rng.below(4)};
  const std::size_t N = 30 + rng.below(100);
  Dataset ds;
  ds.schema = synthetic_schema(vocab, K);
  ds.features = uniform_features(vocab, N, rng);
  ds.labels = Matrix(N, K);
  for (std::size_t i = 0; i < N; ++i) {
    if (kind == LossKind::kLogLoss) ds.labels(i, rng.below(K)) = 1.0;
    else
      for (std::size_t k = 0; k < K; ++k) ds.labels(i, k) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  const SemilinearLoss sl = kind == LossKind::kMse ? mse_loss() : kind == LossKind::kLogLoss ? log_loss() : poisson_loss();
  const std::size_t feature = rng.below(3);
  GamBuilder builder(ds.schema, ds.features, K);
  builder.add_linear_cross({feature});
  for (std::size_t f = 0; f < 3; ++f)
    if (f != feature) builder.add_linear_cross({f});
  GamModel model = builder.build(seed);
  for (double& b : model.beta) b = rng.uniform(-0.5, 0.5);

  const auto col = curated_bags(ds, FeatureSet({feature}));
  const auto& sm = model.sub_models[0];
  double worst = 0.0;
  for (const auto& bag : col.bags) {
    const double m = static_cast<double>(bag.size());
    Vector mean_grad_b(K, 0.0);
    for (std::size_t i : bag.members) {
      const Vector g = hand_grad_b(kind, lookup_output(model, ds.features.row(i)));
      for (std::size_t k = 0; k < K; ++k) mean_grad_b[k] += g[k] / m;
    }
    Vector ybar(K, 0.0);
    for (std::size_t i : bag.members)
      for (std::size_t k = 0; k < K; ++k) ybar[k] += ds.labels(i, k) / m;
    const std::size_t row = sm.combo_rows.at({ds.features.at(bag.members[0], feature)});
    const Vector engine = bag_contribution(model, ds.features, bag, 0, sl);
    for (std::size_t s = 0; s < engine.size(); ++s) {
      const double dfdb = s / K == row ? 1.0 : 0.0;
      const double hand = dfdb * (mean_grad_b[s % K] - ybar[s % K]);
      worst = std::max(worst, std::abs(engine[s] / m - hand));
    }
  }
  return worst;
}

// Largest per-step parameter gap, relative to 1 + ||beta||_inf, between
// individual-label and aggregate-label gradient descent.
inline double trajectory_gap(const LosslessCase& c, std::size_t steps, double lr) {
  const auto p = make_lossless_problem(c);
  std::vector<Vector> ind_path, agg_path;
  TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.steps = steps;
  cfg.seed = c.seed;
  train_loop(p.model, IndividualSource{&p.data}, p.loss, cfg, nullptr,
             [&](std::size_t, const GamModel& m) { ind_path.push_back(m.beta); });
  train_loop(p.model, AggregateSource{&p.data.features, &p.collections, p.phi}, p.loss, cfg, nullptr,
             [&](std::size_t, const GamModel& m) { agg_path.push_back(m.beta); });
  if (ind_path.size() != steps || agg_path.size() != steps) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t) worst = std::max(worst, relative_inf_deviation(agg_path[t], ind_path[t]));
  return worst;
}

// Gradient descent on (1/n) sum_i (logistic(f(x_i)) - y_i)^2 for a model made
// only of K = 1 LinearCross sub-models, with hand-written derivatives.
inline std::vector<Vector> squared_loss_reference_fit(GamModel model, const FeatureTable& features,
                                                      const std::vector<std::size_t>& examples,
                                                      const std::vector<double>& labels, double lr,
                                                      std::size_t steps) {
  std::vector<Vector> path;
  const double n = static_cast<double>(examples.size());
  for (std::size_t t = 0; t < steps; ++t) {
    Vector grad(model.p(), 0.0);
    for (std::size_t e = 0; e < examples.size(); ++e) {
      const auto x = features.row(examples[e]);
      const double z = lookup_output(model, x)[0];
      const double h = 1.0 / (1.0 + std::exp(-z));
      const double d = 2.0 / n * (h - labels[e]) * h * (1.0 - h);
      for (const auto& sm : model.sub_models) {
        std::vector<std::uint32_t> key;
        for (std::size_t f : sm.features) key.push_back(x[f]);
        grad[sm.params[sm.combo_rows.at(key)]] += d;
      }
    }
    for (std::size_t g = 0; g < model.p(); ++g) model.beta[g] -= lr * grad[g];
    path.push_back(model.beta);
  }
  return path;
}

}  // namespace aggbag::testing

#endif  // AGGBAG_TESTS_ORACLES_HPP_
