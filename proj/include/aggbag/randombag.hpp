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

#ifndef AGGBAG_RANDOMBAG_HPP_
#define AGGBAG_RANDOMBAG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "aggbag/bagging.hpp"
#include "aggbag/common.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/gam.hpp"
#include "aggbag/rng.hpp"
#include "aggbag/train.hpp"

namespace aggbag {

struct RandomBagBatch {
  std::vector<RandomBagSample> bags;
  std::size_t m = 1;
  std::size_t N = 0;

  std::size_t n() const { return bags.size(); }
};

// n independent bags; bag i draws from stream i of `seed`.
inline RandomBagBatch make_random_bag_batch(const Dataset& ds, std::size_t m, std::size_t n, std::uint64_t seed) {
  RandomBagBatch batch;
  batch.m = m;
  batch.N = ds.N();
  batch.bags.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    batch.bags.push_back(random_bag_sample(ds, m, rng));
  }
  return batch;
}

// (m-1) N / (m (N-1)): 0 at m = 1, 1 at m = N.
inline double correction_factor(std::size_t m, std::size_t N) {
  if (N < 2) throw Error("correction_factor: N must be >= 2");
  if (m < 1 || m > N) throw Error("correction_factor: m must lie in [1, N]");
  const double md = static_cast<double>(m), nd = static_cast<double>(N);
  return (md - 1.0) * nd / (md * (nd - 1.0));
}

struct CorrectedObjectiveValue {
  double r1_hat = 0.0;
  double r_hat = 0.0;
  double correction_factor = 0.0;
  double objective = 0.0;
};

// From per-bag mean predictions (n x K) and bag labels (n x K).
inline CorrectedObjectiveValue corrected_objective_from_means(const Matrix& bag_means, const Matrix& bag_labels,
                                                              std::size_t m, std::size_t N) {
  const std::size_t n = bag_means.rows();
  if (n == 0) throw Error("corrected_objective: empty batch");
  if (bag_labels.rows() != n || bag_labels.cols() != bag_means.cols())
    throw Error("corrected_objective: shape mismatch");
  const std::size_t K = bag_means.cols();
  CorrectedObjectiveValue v;
  Vector mean_residual(K, 0.0);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double r = bag_means(i, k) - bag_labels(i, k);
      sq += r * r;
      mean_residual[k] += r;
    }
    r1 += sq;
  }
  const auto nd = static_cast<double>(n);
  for (double& r : mean_residual) r /= nd;
  v.r1_hat = r1 / nd;
  v.r_hat = squared_norm(mean_residual);
  v.correction_factor = correction_factor(m, N);
  v.objective = v.r1_hat - v.correction_factor * v.r_hat;
  return v;
}

namespace detail {

// h(x) = logistic(f(x)) for every example referenced by the batch.
struct SigmoidOutputs {
  std::vector<std::optional<Vector>> h;
};

inline SigmoidOutputs sigmoid_outputs(const GamModel& model, const RandomBagBatch& batch,
                                      const FeatureTable& features) {
  SigmoidOutputs out;
  out.h.resize(features.size());
  for (const auto& bag : batch.bags)
    for (std::size_t i : bag.members) {
      if (i >= features.size()) throw Error("random bag references example outside the dataset");
      if (out.h[i]) continue;
      Vector z = forward(model, features.row(i));
      for (double& v : z) {
        if (!std::isfinite(v)) throw Error("corrected_objective: non-finite model output");
        v = logistic(v);
      }
      out.h[i] = std::move(z);
    }
  return out;
}

inline Matrix bag_means(const RandomBagBatch& batch, const SigmoidOutputs& outs, std::size_t K) {
  Matrix means(batch.n(), K);
  for (std::size_t b = 0; b < batch.n(); ++b) {
    const auto& bag = batch.bags[b];
    if (bag.members.size() != batch.m) throw Error("random bag size does not match batch m");
    for (std::size_t i : bag.members)
      for (std::size_t k = 0; k < K; ++k) means(b, k) += (*outs.h[i])[k];
    for (std::size_t k = 0; k < K; ++k) means(b, k) /= static_cast<double>(batch.m);
  }
  return means;
}

inline Matrix bag_labels(const RandomBagBatch& batch, std::size_t K) {
  Matrix labels(batch.n(), K);
  for (std::size_t b = 0; b < batch.n(); ++b) {
    if (batch.bags[b].aggregate_label.size() != K) throw Error("random bag label width mismatch");
    for (std::size_t k = 0; k < K; ++k) labels(b, k) = batch.bags[b].aggregate_label[k];
  }
  return labels;
}

}  // namespace detail

// r1_hat = (1/n) sum_i ||mean_{x in X_i} h(x) - ybar_i||^2,
// r_hat  = ||(1/n) sum_i (mean_{x in X_i} h(x) - ybar_i)||^2,
// with h the model output passed entrywise through the logistic map.
inline CorrectedObjectiveValue corrected_objective(const GamModel& model, const RandomBagBatch& batch,
                                                   const FeatureTable& features) {
  if (batch.n() == 0) throw Error("corrected_objective: empty batch");
  const auto outs = detail::sigmoid_outputs(model, batch, features);
  return corrected_objective_from_means(detail::bag_means(batch, outs, model.K), detail::bag_labels(batch, model.K),
                                        batch.m, batch.N);
}

struct ObjectiveGradient {
  CorrectedObjectiveValue value;
  Vector grad;
};

inline ObjectiveGradient corrected_objective_gradient(const GamModel& model, const RandomBagBatch& batch,
                                                      const FeatureTable& features) {
  if (batch.n() == 0) throw Error("corrected_objective: empty batch");
  const std::size_t K = model.K;
  const auto outs = detail::sigmoid_outputs(model, batch, features);
  const Matrix means = detail::bag_means(batch, outs, K);
  const Matrix labels = detail::bag_labels(batch, K);
  ObjectiveGradient res;
  res.value = corrected_objective_from_means(means, labels, batch.m, batch.N);

  const auto n = static_cast<double>(batch.n());
  Vector mean_residual(K, 0.0);
  for (std::size_t b = 0; b < batch.n(); ++b)
    for (std::size_t k = 0; k < K; ++k) mean_residual[k] += (means(b, k) - labels(b, k)) / n;

  // d objective / d h(x), accumulated over every bag containing x.
  Matrix dh(features.size(), K);
  std::vector<bool> touched(features.size(), false);
  const double c = res.value.correction_factor;
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  for (std::size_t b = 0; b < batch.n(); ++b) {
    Vector dr(K);
    for (std::size_t k = 0; k < K; ++k)
      dr[k] = (2.0 / n) * (means(b, k) - labels(b, k)) - (2.0 * c / n) * mean_residual[k];
    for (std::size_t i : batch.bags[b].members) {
      touched[i] = true;
      for (std::size_t k = 0; k < K; ++k) dh(i, k) += inv_m * dr[k];
    }
  }
  res.grad.assign(model.p(), 0.0);
  Vector dz(K);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!touched[i]) continue;
    const Vector& h = *outs.h[i];
    for (std::size_t k = 0; k < K; ++k) dz[k] = dh(i, k) * h[k] * (1.0 - h[k]);
    detail::accumulate_all_submodels(model, features.row(i), dz, res.grad);
  }
  return res;
}

// Fraction of label entries where the thresholded logistic output disagrees,
// summed over entries and averaged over examples.
inline double sigmoid_hamming_risk(const GamModel& model, const Dataset& ds) {
  double wrong = 0.0;
  for (std::size_t i = 0; i < ds.N(); ++i) {
    const Vector z = forward(model, ds.features.row(i));
    for (std::size_t k = 0; k < model.K; ++k) wrong += ((z[k] >= 0.0 ? 1.0 : 0.0) != ds.labels(i, k)) ? 1.0 : 0.0;
  }
  return wrong / static_cast<double>(ds.N());
}

// Mean over examples of sum_k binary cross-entropy of logistic(f(x)[k]).
inline double sigmoid_log_loss(const GamModel& model, const Dataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.N(); ++i) {
    const Vector z = forward(model, ds.features.row(i));
    for (std::size_t k = 0; k < model.K; ++k) {
      const double softplus = z[k] > 0 ? z[k] + std::log1p(std::exp(-z[k])) : std::log1p(std::exp(z[k]));
      total += softplus - ds.labels(i, k) * z[k];
    }
  }
  return total / static_cast<double>(ds.N());
}

struct RandomBagTraceRecord {
  std::size_t step = 0;
  double objective = 0.0;
  std::optional<double> eval_log_loss;
  std::optional<double> eval_hamming_risk;
};

struct RandomBagFit {
  GamModel model;
  std::vector<RandomBagTraceRecord> trace;
};

// Gradient descent on the corrected objective. The objective recorded at step
// t is the value before that step's update.
inline RandomBagFit fit_random_bags(GamModel model, const RandomBagBatch& batch, const FeatureTable& features,
                                    const TrainConfig& cfg, const Dataset* eval = nullptr,
                                    const StepCallback& on_step = {}) {
  cfg.validate();
  RandomBagFit fit;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const auto og = corrected_objective_gradient(model, batch, features);
    if (!std::isfinite(og.value.objective)) throw Error("fit_random_bags: diverged at step " + std::to_string(step));
    for (std::size_t i = 0; i < og.grad.size(); ++i) model.beta[i] -= cfg.learning_rate * og.grad[i];
    RandomBagTraceRecord rec{step, og.value.objective, std::nullopt, std::nullopt};
    if (eval != nullptr) {
      rec.eval_log_loss = sigmoid_log_loss(model, *eval);
      rec.eval_hamming_risk = sigmoid_hamming_risk(model, *eval);
      if (!std::isfinite(*rec.eval_log_loss))
        throw Error("fit_random_bags: diverged at step " + std::to_string(step));
    }
    fit.trace.push_back(rec);
    if (on_step) on_step(step, model);
  }
  fit.model = std::move(model);
  return fit;
}

// ---------------------------------------------------------------------------
// Monte-Carlo helpers

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact evaluations
  std::size_t trials = 0;
  bool exact = false;
};

// Evaluates fn(t) for t in [0, trials), on up to `threads` threads, and reduces
// with pairwise summation in trial order.
inline Estimate monte_carlo(std::size_t trials, std::size_t threads, const std::function<double(std::size_t)>& fn) {
  if (trials == 0) throw Error("monte_carlo: trials must be >= 1");
  std::vector<double> vals(trials);
  threads = std::max<std::size_t>(1, std::min(threads, trials));
  if (threads == 1) {
    for (std::size_t t = 0; t < trials; ++t) vals[t] = fn(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < trials; t += threads) vals[t] = fn(t);
      });
  }
  Estimate e;
  e.trials = trials;
  const double n = static_cast<double>(trials);
  e.value = pairwise_sum(vals) / n;
  if (trials > 1) {
    std::vector<double> sq(trials);
    for (std::size_t t = 0; t < trials; ++t) sq[t] = (vals[t] - e.value) * (vals[t] - e.value);
    e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Rademacher complexities over finite hypothesis lists.
//
// A hypothesis table holds one row per hypothesis and one column per
// (point, output entry) pair; `n_points` is the normalizer 1/n. Scalar
// hypotheses have K = 1, so the flattened complexity with K = 1 is the
// ordinary one.

struct HypothesisTable {
  Matrix values;  // H x (n * K), column i * K + k
  std::size_t n_points = 0;
  std::size_t K = 1;
};

template <class Hypothesis, class Point>
HypothesisTable tabulate_scalar(std::span<const Hypothesis> hyps, std::span<const Point> points) {
  if (hyps.empty()) throw Error("rademacher: empty hypothesis list");
  HypothesisTable t{Matrix(hyps.size(), points.size()), points.size(), 1};
  for (std::size_t h = 0; h < hyps.size(); ++h)
    for (std::size_t i = 0; i < points.size(); ++i) t.values(h, i) = static_cast<double>(hyps[h](points[i]));
  return t;
}

template <class Hypothesis, class Point>
HypothesisTable tabulate_vector(std::span<const Hypothesis> hyps, std::span<const Point> points, std::size_t K) {
  if (hyps.empty()) throw Error("rademacher: empty hypothesis list");
  HypothesisTable t{Matrix(hyps.size(), points.size() * K), points.size(), K};
  for (std::size_t h = 0; h < hyps.size(); ++h)
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto out = hyps[h](points[i]);
      if (out.size() != K) throw Error("rademacher: hypothesis output width mismatch");
      for (std::size_t k = 0; k < K; ++k) t.values(h, i * K + k) = out[k];
    }
  return t;
}

namespace detail {

inline double sup_correlation(const HypothesisTable& t, std::span<const double> sigma) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < t.values.rows(); ++h) {
    double acc = 0.0;
    const auto row = t.values.row(h);
    for (std::size_t c = 0; c < sigma.size(); ++c) acc += sigma[c] * row[c];
    best = std::max(best, acc);
  }
  return best / static_cast<double>(t.n_points);
}

}  // namespace detail

// E_sigma sup_h (1/n) sum sigma h, by enumerating all sign patterns.
inline Estimate rademacher_exact(const HypothesisTable& t) {
  if (t.values.rows() == 0 || t.n_points == 0) throw Error("rademacher: empty hypothesis list or point set");
  const std::size_t cols = t.values.cols();
  if (cols > 24) throw Error("rademacher_exact: too many sign variables for enumeration");
  const std::size_t patterns = std::size_t{1} << cols;
  std::vector<double> vals(patterns);
  Vector sigma(cols);
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    for (std::size_t c = 0; c < cols; ++c) sigma[c] = (mask >> c) & 1U ? 1.0 : -1.0;
    vals[mask] = detail::sup_correlation(t, sigma);
  }
  return {pairwise_sum(vals) / static_cast<double>(patterns), 0.0, patterns, true};
}

// Monte-Carlo over `trials` sign draws; trial t uses stream t of `seed`.
inline Estimate rademacher_monte_carlo(const HypothesisTable& t, std::size_t trials, std::uint64_t seed,
                                       std::size_t threads = 1) {
  if (t.values.rows() == 0 || t.n_points == 0) throw Error("rademacher: empty hypothesis list or point set");
  return monte_carlo(trials, threads, [&](std::size_t trial) {
    CounterRng rng(seed, trial);
    Vector sigma(t.values.cols());
    for (double& s : sigma) s = rng.rademacher();
    return detail::sup_correlation(t, sigma);
  });
}

enum class RademacherMode { kMonteCarlo, kExact };

template <class Hypothesis, class Point>
Estimate empirical_rademacher(std::span<const Hypothesis> hyps, std::span<const Point> points, std::size_t trials,
                              std::uint64_t seed, RademacherMode mode = RademacherMode::kMonteCarlo,
                              std::size_t threads = 1) {
  const auto t = tabulate_scalar(hyps, points);
  return mode == RademacherMode::kExact ? rademacher_exact(t) : rademacher_monte_carlo(t, trials, seed, threads);
}

template <class Hypothesis, class Point>
Estimate flattened_rademacher(std::span<const Hypothesis> hyps, std::span<const Point> points, std::size_t K,
                              std::size_t trials, std::uint64_t seed, RademacherMode mode = RademacherMode::kMonteCarlo,
                              std::size_t threads = 1) {
  const auto t = tabulate_vector(hyps, points, K);
  return mode == RademacherMode::kExact ? rademacher_exact(t) : rademacher_monte_carlo(t, trials, seed, threads);
}

// ---------------------------------------------------------------------------
// Excess-risk bound

struct BoundInputs {
  std::vector<double> rademacher_per_class;  // one per output entry k
  double flat_rademacher_emp = 0.0;          // flattened, on the n bags' empirical measure
  double flat_rademacher_pop = 0.0;          // flattened, plug-in on the N training points
  double delta = 0.05;
  std::size_t m = 1, N = 2, n = 1, K = 1;
};

// Holds with probability 1 - 4 delta:
//   8(m-1)N/(N-m) (sum_k R_n(H_k) + K sqrt(log(2mK/delta)/(2n)))
//   + 2 (4 sqrt(2K) R+_N + sqrt(log(2/delta)/(2N)))
//   + 2m(N-1)/(N-m) (4 sqrt(2K) R+_n + sqrt(log(2/delta)/(2n)))
inline double excess_risk_bound(const BoundInputs& in) {
  if (in.m < 1 || in.m >= in.N) throw Error("excess_risk_bound: requires 1 <= m < N");
  if (!(in.delta > 0.0 && in.delta <= 0.25)) throw Error("excess_risk_bound: delta must lie in (0, 0.25]");
  if (in.n < 1 || in.K < 1) throw Error("excess_risk_bound: n and K must be positive");
  if (in.rademacher_per_class.size() != in.K) throw Error("excess_risk_bound: need one complexity per class");
  for (double r : in.rademacher_per_class)
    if (r < 0) throw Error("excess_risk_bound: complexities must be non-negative");
  if (in.flat_rademacher_emp < 0 || in.flat_rademacher_pop < 0)
    throw Error("excess_risk_bound: complexities must be non-negative");

  const double m = static_cast<double>(in.m), N = static_cast<double>(in.N), n = static_cast<double>(in.n),
               K = static_cast<double>(in.K), delta = in.delta;
  double per_class = 0.0;
  for (double r : in.rademacher_per_class) per_class += r;
  const double t1 = 8.0 * (m - 1.0) * N / (N - m) * (per_class + K * std::sqrt(std::log(2.0 * m * K / delta) / (2.0 * n)));
  const double t2 = 2.0 * (4.0 * std::sqrt(2.0 * K) * in.flat_rademacher_pop + std::sqrt(std::log(2.0 / delta) / (2.0 * N)));
  const double t3 = 2.0 * m * (N - 1.0) / (N - m) *
                    (4.0 * std::sqrt(2.0 * K) * in.flat_rademacher_emp + std::sqrt(std::log(2.0 / delta) / (2.0 * n)));
  return t1 + t2 + t3;
}

// ---------------------------------------------------------------------------
// Without-replacement moments

// E ||(1/m) sum of m rows drawn without replacement||^2, closed form:
//   ((m-1) N ||mean||^2 + (N-m) mean ||x||^2) / (m (N-1)).
inline double wor_mean_sqnorm(const Matrix& vectors, std::size_t m) {
  const std::size_t N = vectors.rows();
  if (N < 2) throw Error("wor_mean_sqnorm: need at least two vectors");
  if (m < 1 || m > N) throw Error("wor_mean_sqnorm: m out of range");
  Vector mean(vectors.cols(), 0.0);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    mean_sq += squared_norm(vectors.row(i));
    for (std::size_t c = 0; c < vectors.cols(); ++c) mean[c] += vectors(i, c);
  }
  const double Nd = static_cast<double>(N), md = static_cast<double>(m);
  for (double& v : mean) v /= Nd;
  mean_sq /= Nd;
  return ((md - 1.0) * Nd * squared_norm(mean) + (Nd - md) * mean_sq) / (md * (Nd - 1.0));
}

// Same quantity by averaging over all C(N, m) subsets.
inline double wor_mean_sqnorm_bruteforce(const Matrix& vectors, std::size_t m) {
  const std::size_t N = vectors.rows();
  if (m < 1 || m > N) throw Error("wor_mean_sqnorm: m out of range");
  std::vector<bool> pick(N, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
  std::vector<double> vals;
  Vector mean(vectors.cols());
  do {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t i = 0; i < N; ++i)
      if (pick[i])
        for (std::size_t c = 0; c < vectors.cols(); ++c) mean[c] += vectors(i, c);
    for (double& v : mean) v /= static_cast<double>(m);
    vals.push_back(squared_norm(mean));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return pairwise_sum(vals) / static_cast<double>(vals.size());
}

struct R1Check {
  double mc_estimate = 0.0;
  double std_error = 0.0;
  double closed_form = 0.0;          // exact under without-replacement sampling
  double closed_form_literal = 0.0;  // variance term (1 - 1/m) Var, i.e. a with-replacement second moment
  double abs_diff = 0.0;             // |mc_estimate - closed_form|
};

// R1(h) = E ||mean_{x in X} h(x) - ybar||^2 over random bags of size m with
// Bernoulli aggregate labels. `predictions` holds h(x_i), `labels` y_i, N x K.
//
// Closed form: ((m-1)N ||E(h-y)||^2 + (N-m) E||h-y||^2) / (m(N-1))
//              + (m-1)N/(m(N-1)) sum_k Var(y[k]),
// the variance term being E[p(1-p)] for the without-replacement bag mean p.
inline R1Check r1_closed_form_check(const Matrix& predictions, const Matrix& labels, std::size_t m, std::size_t trials,
                                    std::uint64_t seed, std::size_t threads = 1, bool strict = true) {
  const std::size_t N = labels.rows(), K = labels.cols();
  if (predictions.rows() != N || predictions.cols() != K) throw Error("r1_check: shape mismatch");
  if (N < 2) throw Error("r1_check: N must be >= 2");
  if (m < 1 || m > N) throw Error("r1_check: m out of range");
  for (double v : labels.data())
    if (v != 0.0 && v != 1.0) throw Error("r1_check: labels must be binary");
  if (strict)
    for (double v : predictions.data())
      if (v != 0.0 && v != 1.0) throw Error("r1_check: hypothesis must be binary-valued");

  const double Nd = static_cast<double>(N), md = static_cast<double>(m);
  Vector mean_diff(K, 0.0), mean_y(K, 0.0);
  double mean_sq_diff = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const double d = predictions(i, k) - labels(i, k);
      mean_diff[k] += d / Nd;
      mean_sq_diff += d * d / Nd;
      mean_y[k] += labels(i, k) / Nd;
    }
  double var_y = 0.0;
  for (double mu : mean_y) var_y += mu * (1.0 - mu);
  const double first = ((md - 1.0) * Nd * squared_norm(mean_diff) + (Nd - md) * mean_sq_diff) / (md * (Nd - 1.0));

  R1Check out;
  out.closed_form = first + (md - 1.0) * Nd / (md * (Nd - 1.0)) * var_y;
  out.closed_form_literal = first + (1.0 - 1.0 / md) * var_y;

  const Estimate e = monte_carlo(trials, threads, [&](std::size_t t) {
    CounterRng rng(seed, t);
    const auto members = sample_without_replacement(N, m, rng);
    double sq = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double hbar = 0.0, ybar = 0.0;
      for (std::size_t i : members) {
        hbar += predictions(i, k);
        ybar += labels(i, k);
      }
      hbar /= md;
      const double agg = rng.bernoulli(ybar / md) ? 1.0 : 0.0;
      sq += (hbar - agg) * (hbar - agg);
    }
    return sq;
  });
  out.mc_estimate = e.value;
  out.std_error = e.std_error;
  out.abs_diff = std::abs(out.mc_estimate - out.closed_form);
  return out;
}

// Same check with h(x) = 1{logistic(f(x)) >= 0.5} from a fitted model.
inline R1Check r1_closed_form_check(const GamModel& model, const Dataset& ds, std::size_t m, std::size_t trials,
                                    std::uint64_t seed, std::size_t threads = 1) {
  Matrix preds(ds.N(), model.K);
  for (std::size_t i = 0; i < ds.N(); ++i) {
    const Vector z = forward(model, ds.features.row(i));
    for (std::size_t k = 0; k < model.K; ++k) preds(i, k) = z[k] >= 0.0 ? 1.0 : 0.0;
  }
  return r1_closed_form_check(preds, ds.labels, m, trials, seed, threads);
}

}  // namespace aggbag

#endif  // AGGBAG_RANDOMBAG_HPP_
