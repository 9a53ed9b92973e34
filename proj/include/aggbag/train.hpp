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

#ifndef AGGBAG_TRAIN_HPP_
#define AGGBAG_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aggbag/bagging.hpp"
#include "aggbag/common.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/gam.hpp"
#include "aggbag/rng.hpp"
#include "aggbag/semilinear_loss.hpp"

namespace aggbag {

enum class GradientMode { kIndividual, kAggregate };

struct GradientReport {
  Vector grad;
  std::optional<double> loss_proxy;  // total training loss, individual mode only
  std::size_t bags_visited = 0;
  GradientMode mode = GradientMode::kIndividual;
};

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite value");
}

inline void accumulate_all_submodels(const GamModel& model, std::span<const std::uint32_t> x,
                                     std::span<const double> r, std::span<double> grad) {
  for (std::size_t j = 0; j < model.sub_models.size(); ++j)
    accumulate_jacobian_transpose(model, j, project(x, model.sub_models[j].features), r, grad);
}

}  // namespace detail

// sum over examples of J(x)^T (grad_b(yhat_x) - T(y_x)). Reads individual
// labels; used as the reference for the aggregate engine.
inline GradientReport individual_gradient(const GamModel& model, const Dataset& ds, const SemilinearLoss& sl,
                                          std::span<const std::size_t> subset = {}) {
  GradientReport rep;
  rep.mode = GradientMode::kIndividual;
  rep.grad.assign(model.p(), 0.0);
  double total = 0.0;
  const std::size_t n = subset.empty() ? ds.N() : subset.size();
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = subset.empty() ? t : subset[t];
    const auto x = ds.features.row(i);
    const auto y = ds.labels.row(i);
    const Vector yhat = forward(model, x);
    detail::check_finite(yhat, "individual_gradient: forward");
    Vector r = grad_b_eval(sl, yhat);
    const Vector ty = sl.transform(y);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= ty[k];
    detail::accumulate_all_submodels(model, x, r, rep.grad);
    total += loss(sl, y, yhat);
  }
  rep.loss_proxy = total;
  return rep;
}

// Memoised forward passes keyed by example index. Needs features only.
class ForwardCache {
 public:
  ForwardCache(const GamModel& model, const FeatureTable& features)
      : model_(model), features_(features), cache_(features.size()) {}

  const Vector& operator()(std::size_t i) {
    if (i >= cache_.size()) throw Error("bag references example " + std::to_string(i) + " outside the dataset");
    if (!cache_[i]) {
      cache_[i] = forward(model_, features_.row(i));
      detail::check_finite(*cache_[i], "aggregate_gradient: forward");
    }
    return *cache_[i];
  }

 private:
  const GamModel& model_;
  const FeatureTable& features_;
  std::vector<std::optional<Vector>> cache_;
};

// s_X = sum_{x in X} (grad_b(yhat_x) - ybar_X).
inline Vector bag_residual_sum(const AggregateBag& bag, const SemilinearLoss& sl, ForwardCache& fwd) {
  Vector s(bag.aggregate_label.size(), 0.0);
  for (std::size_t i : bag.members) {
    const Vector g = grad_b_eval(sl, fwd(i));
    if (g.size() != s.size()) throw Error("aggregate label width does not match model output");
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += g[k] - bag.aggregate_label[k];
  }
  return s;
}

// J_j(E'_j(X))^T s_X in local slot order: one bag's share of the gradient of
// sub-model j.
inline Vector bag_contribution(const GamModel& model, const FeatureTable& features, const AggregateBag& bag,
                               std::size_t j, const SemilinearLoss& sl) {
  if (bag.members.empty()) throw Error("bag_contribution: empty bag");
  ForwardCache fwd(model, features);
  const Vector s = bag_residual_sum(bag, sl, fwd);
  const Matrix jac = sub_jacobian(model, j, project(features.row(bag.members.front()), model.sub_models[j].features));
  Vector out(jac.cols(), 0.0);
  for (std::size_t c = 0; c < jac.cols(); ++c)
    for (std::size_t k = 0; k < jac.rows(); ++k) out[c] += jac(k, c) * s[k];
  return out;
}

struct AggregateOptions {
  // Per collection, the bag indices to visit; empty means all bags.
  std::vector<std::vector<std::size_t>> bag_subset;
  // Per collection multiplier on its contribution; empty means 1.
  Vector collection_weight;
};

// Gradient of the total loss from aggregate labels only. The labels enter
// solely through BagCollection::aggregate_label; `features` carries none.
// Bags are visited in ascending key order within each collection.
inline GradientReport aggregate_gradient(const GamModel& model, const FeatureTable& features,
                                         const std::vector<BagCollection>& collections, const SemilinearLoss& sl,
                                         std::span<const std::size_t> phi, const AggregateOptions& opts = {}) {
  if (phi.size() != model.sub_models.size()) throw Error("aggregate_gradient: phi missing or incomplete");
  for (std::size_t c : phi)
    if (c >= collections.size()) throw Error("aggregate_gradient: phi references a missing collection");

  GradientReport rep;
  rep.mode = GradientMode::kAggregate;
  rep.grad.assign(model.p(), 0.0);
  ForwardCache fwd(model, features);
  std::vector<std::size_t> assigned;
  for (std::size_t c = 0; c < collections.size(); ++c) {
    assigned.clear();
    for (std::size_t j = 0; j < phi.size(); ++j)
      if (phi[j] == c) assigned.push_back(j);
    if (assigned.empty()) continue;
    const auto& col = collections[c];
    const double weight = opts.collection_weight.empty() ? 1.0 : opts.collection_weight.at(c);
    const bool subset = !opts.bag_subset.empty() && !opts.bag_subset.at(c).empty();
    const std::size_t nb = subset ? opts.bag_subset[c].size() : col.bags.size();
    for (std::size_t t = 0; t < nb; ++t) {
      const auto& bag = col.bags.at(subset ? opts.bag_subset[c][t] : t);
      if (bag.members.empty()) continue;
      Vector s = bag_residual_sum(bag, sl, fwd);
      if (weight != 1.0)
        for (double& v : s) v *= weight;
      const auto x0 = features.row(bag.members.front());
      for (std::size_t j : assigned)
        accumulate_jacobian_transpose(model, j, project(x0, model.sub_models[j].features), s, rep.grad);
      ++rep.bags_visited;
    }
  }
  detail::check_finite(rep.grad, "aggregate_gradient");
  return rep;
}

struct Metrics {
  double mean_loss = 0.0;
  std::optional<double> hamming_risk;  // absent for losses without a prediction map
};

// Binary prediction used for Hamming risk: MSE thresholds each output at 0.5,
// log loss takes the argmax as a one-hot vector.
inline std::optional<Vector> predict_labels(const SemilinearLoss& sl, std::span<const double> yhat) {
  Vector out(yhat.size(), 0.0);
  if (sl.kind == LossKind::kMse) {
    for (std::size_t k = 0; k < yhat.size(); ++k) out[k] = yhat[k] >= 0.5 ? 1.0 : 0.0;
    return out;
  }
  if (sl.kind == LossKind::kLogLoss) {
    out[static_cast<std::size_t>(std::max_element(yhat.begin(), yhat.end()) - yhat.begin())] = 1.0;
    return out;
  }
  return std::nullopt;
}

inline Metrics eval_metrics(const GamModel& model, const Dataset& ds, const SemilinearLoss& sl) {
  if (ds.N() == 0) throw Error("eval_metrics: empty dataset");
  Metrics m;
  double total = 0.0;
  double wrong = 0.0;
  bool has_map = true;
  for (std::size_t i = 0; i < ds.N(); ++i) {
    const Vector yhat = forward(model, ds.features.row(i));
    const auto y = ds.labels.row(i);
    total += loss(sl, y, yhat);
    const auto pred = predict_labels(sl, yhat);
    if (!pred) {
      has_map = false;
      continue;
    }
    for (std::size_t k = 0; k < y.size(); ++k) wrong += (*pred)[k] != y[k] ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(ds.N());
  m.mean_loss = total / n;
  if (has_map) m.hamming_risk = wrong / n;
  return m;
}

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> batch_bags;  // bags per collection per step; absent = full batch

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("train: learning rate must be positive");
  }
};

struct IndividualSource {
  const Dataset* data = nullptr;
};

struct AggregateSource {
  const FeatureTable* features = nullptr;
  const std::vector<BagCollection>* collections = nullptr;
  std::vector<std::size_t> phi;
};

using DataSource = std::variant<IndividualSource, AggregateSource>;

struct TraceRecord {
  std::size_t step = 0;
  double mean_loss = 0.0;
  std::optional<double> hamming_risk;
};

struct TrainResult {
  GamModel model;
  std::vector<TraceRecord> trace;
};

namespace detail {

inline std::vector<std::size_t> pick(std::size_t n, std::optional<std::size_t> batch, CounterRng& rng) {
  if (!batch || *batch >= n) return {};
  auto idx = sample_without_replacement(n, *batch, rng);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Gradient scaled to a per-example mean. In aggregate mode each collection's
// contribution is divided by the number of examples in the bags it visited.
inline Vector normalized_gradient(const GamModel& model, const DataSource& source, const SemilinearLoss& sl,
                                  const TrainConfig& cfg, std::size_t step) {
  CounterRng rng(cfg.seed, step + 1);
  if (const auto* ind = std::get_if<IndividualSource>(&source)) {
    const auto subset = pick(ind->data->N(), cfg.batch_bags, rng);
    GradientReport rep = individual_gradient(model, *ind->data, sl, subset);
    const double n = static_cast<double>(subset.empty() ? ind->data->N() : subset.size());
    for (double& g : rep.grad) g /= n;
    return rep.grad;
  }
  const auto& agg = std::get<AggregateSource>(source);
  AggregateOptions opts;
  for (const auto& col : *agg.collections) {
    auto subset = pick(col.bags.size(), cfg.batch_bags, rng);
    std::size_t members = 0;
    if (subset.empty()) members = col.retained();
    else
      for (std::size_t b : subset) members += col.bags[b].size();
    opts.collection_weight.push_back(members == 0 ? 0.0 : 1.0 / static_cast<double>(members));
    opts.bag_subset.push_back(std::move(subset));
  }
  return aggregate_gradient(model, *agg.features, *agg.collections, sl, agg.phi, opts).grad;
}

}  // namespace detail

using StepCallback = std::function<void(std::size_t step, const GamModel& model)>;

// Plain gradient descent: beta <- beta - lr * grad / N_effective. When `eval`
// is given, its metrics are appended to the trace after every step.
inline TrainResult train_loop(GamModel model, const DataSource& source, const SemilinearLoss& sl,
                              const TrainConfig& cfg, const Dataset* eval = nullptr,
                              const StepCallback& on_step = {}) {
  cfg.validate();
  TrainResult result;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Vector g;
    try {
      g = detail::normalized_gradient(model, source, sl, cfg, step);
    } catch (const Error& e) {
      throw Error("train: diverged at step " + std::to_string(step) + " (" + e.what() + ")");
    }
    for (std::size_t i = 0; i < g.size(); ++i) model.beta[i] -= cfg.learning_rate * g[i];
    if (eval != nullptr) {
      const Metrics m = eval_metrics(model, *eval, sl);
      if (!std::isfinite(m.mean_loss)) throw Error("train: diverged at step " + std::to_string(step));
      result.trace.push_back({step, m.mean_loss, m.hamming_risk});
    }
    if (on_step) on_step(step, model);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace aggbag

#endif  // AGGBAG_TRAIN_HPP_
