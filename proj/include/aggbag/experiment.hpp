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

#ifndef AGGBAG_EXPERIMENT_HPP_
#define AGGBAG_EXPERIMENT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "aggbag/bagging.hpp"
#include "aggbag/gam.hpp"
#include "aggbag/randombag.hpp"
#include "aggbag/semilinear_loss.hpp"
#include "aggbag/synthetic.hpp"
#include "aggbag/train.hpp"

namespace aggbag {

// Desk-scale sweeps on synthetic GAM data. Curated-bag runs train a two-class
// log-loss model on one-hot labels; random-bag runs fit the corrected
// objective on a logistic-output model. Both report test log loss as binary
// cross-entropy against the same test labels.
struct ExperimentConfig {
  SyntheticConfig data;
  std::size_t seeds = 10;
  std::uint64_t base_seed = 1;

  std::size_t steps = 100;
  double learning_rate = 4.0;
  std::size_t mlp_hidden = 8;
  double dnn_learning_rate = 0.5;

  std::size_t rb_steps = 100;
  double rb_learning_rate = 20.0;
  std::size_t rb_bags = 0;  // bags per random-bag run; 0 means N

  std::vector<double> epsilons = {0.5, 1.0, 2.0, 4.0, std::numeric_limits<double>::infinity()};
  std::vector<std::size_t> bag_sizes = {1, 4, 16, 64};
  std::size_t compare_bag_size = 16;
  std::size_t threads = 1;
};

struct ExperimentRow {
  std::string series;
  double param = 0.0;  // epsilon, bag size, or 0
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double test_log_loss = 0.0;
};

struct ExperimentResult {
  std::string name;
  std::vector<ExperimentRow> finals;  // one per (series, param, seed)
  std::vector<ExperimentRow> curves;  // per-step values, where recorded
};

// Curated-bag setup: LinearCross (or Mlp) sub-models on every single feature
// and every interaction pair; one collection per pair plus one per feature
// not covered by a pair.
struct CuratedSetup {
  Dataset train;  // one-hot labels
  Dataset test;   // one-hot labels
  GamModel model;
  std::vector<BagCollection> collections;
  std::vector<std::size_t> phi;
};

enum class CuratedArch { kLinear, kDnn };

inline CuratedSetup make_curated_setup(const SyntheticTask& task, const ExperimentConfig& cfg, CuratedArch arch,
                                       std::uint64_t seed) {
  CuratedSetup s;
  s.train = to_one_hot(task.train);
  s.test = to_one_hot(task.test);
  const std::size_t d = s.train.d();
  GamBuilder b(s.train.schema, s.train.features, 2);
  std::vector<FeatureSet> sets;
  std::vector<bool> covered(d, false);
  for (auto [p, q] : cfg.data.interactions) {
    sets.emplace_back(std::vector<std::size_t>{p, q});
    covered[p] = covered[q] = true;
  }
  for (std::size_t c = 0; c < d; ++c)
    if (!covered[c]) sets.emplace_back(std::vector<std::size_t>{c});
  if (arch == CuratedArch::kLinear) {
    for (std::size_t c = 0; c < d; ++c) b.add_linear_cross({c});
    for (auto [p, q] : cfg.data.interactions) b.add_linear_cross({p, q});
  } else {
    for (const auto& fs : sets) b.add_mlp(fs.columns(), {cfg.mlp_hidden});
  }
  s.model = b.build(seed, UnseenPolicy::kZero);
  s.collections = multi_curated_bags(s.train, sets);
  s.phi = validate_phi(s.model, s.collections);
  return s;
}

inline GamModel make_random_bag_model(const SyntheticTask& task, const ExperimentConfig& cfg, std::uint64_t seed) {
  GamBuilder b(task.train.schema, task.train.features, 1);
  for (std::size_t c = 0; c < task.train.d(); ++c) b.add_linear_cross({c});
  for (auto [p, q] : cfg.data.interactions) b.add_linear_cross({p, q});
  return b.build(seed, UnseenPolicy::kZero);
}

namespace detail {

inline void for_each_seed(const ExperimentConfig& cfg, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, cfg.seeds));
  if (threads == 1) {
    for (std::size_t s = 0; s < cfg.seeds; ++s) fn(s);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t s = w; s < cfg.seeds; s += threads) fn(s);
    });
}

inline double curated_final_loss(const CuratedSetup& s, const std::vector<BagCollection>& collections,
                                 const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto sl = log_loss();
  TrainConfig tc{cfg.learning_rate, cfg.steps, seed, std::nullopt};
  const auto res = train_loop(s.model, AggregateSource{&s.train.features, &collections, s.phi}, sl, tc);
  return eval_metrics(res.model, s.test, sl).mean_loss;
}

inline double random_bag_final_loss(const SyntheticTask& task, const ExperimentConfig& cfg, std::size_t m,
                                    std::uint64_t seed) {
  const std::size_t n = cfg.rb_bags == 0 ? task.train.N() : cfg.rb_bags;
  const auto batch = make_random_bag_batch(task.train, m, n, mix64(seed ^ (0xba9ULL + m)));
  TrainConfig tc{cfg.rb_learning_rate, cfg.rb_steps, seed, std::nullopt};
  const auto fit = fit_random_bags(make_random_bag_model(task, cfg, seed), batch, task.train.features, tc);
  return sigmoid_log_loss(fit.model, task.test);
}

}  // namespace detail

// Aggregate vs individual training of the same model from the same start,
// recording test log loss after every step.
inline ExperimentResult run_noise_free(const ExperimentConfig& cfg) {
  ExperimentResult out{"noise_free", {}, {}};
  std::vector<std::vector<ExperimentRow>> per_seed(cfg.seeds);
  detail::for_each_seed(cfg, [&](std::size_t si) {
    const std::uint64_t seed = cfg.base_seed + si;
    const auto task = make_synthetic(cfg.data, seed);
    const auto sl = log_loss();
    for (CuratedArch arch : {CuratedArch::kDnn, CuratedArch::kLinear}) {
      const auto s = make_curated_setup(task, cfg, arch, seed);
      const double lr = arch == CuratedArch::kDnn ? cfg.dnn_learning_rate : cfg.learning_rate;
      TrainConfig tc{lr, cfg.steps, seed, std::nullopt};
      const std::string prefix = arch == CuratedArch::kDnn ? "dnn_" : "linear_";
      const auto agg = train_loop(s.model, AggregateSource{&s.train.features, &s.collections, s.phi}, sl, tc, &s.test);
      const auto ind = train_loop(s.model, IndividualSource{&s.train}, sl, tc, &s.test);
      for (const auto& [name, res] : {std::pair{prefix + "aggregate", &agg}, std::pair{prefix + "individual", &ind}})
        for (const auto& r : res->trace) per_seed[si].push_back({name, 0.0, seed, r.step, r.mean_loss});
    }
  });
  for (auto& rows : per_seed)
    for (auto& r : rows) {
      out.curves.push_back(r);
      if (r.step == cfg.steps) out.finals.push_back(r);
    }
  return out;
}

// Curated bags with double-exponential noise at each epsilon (infinity means
// no noise). The noise seed depends only on the data seed.
inline ExperimentResult run_dp_sweep(const ExperimentConfig& cfg) {
  ExperimentResult out{"dp_sweep", {}, {}};
  std::vector<std::vector<ExperimentRow>> per_seed(cfg.seeds);
  detail::for_each_seed(cfg, [&](std::size_t si) {
    const std::uint64_t seed = cfg.base_seed + si;
    const auto task = make_synthetic(cfg.data, seed);
    const auto s = make_curated_setup(task, cfg, CuratedArch::kLinear, seed);
    for (double eps : cfg.epsilons) {
      std::vector<BagCollection> cols = s.collections;
      if (std::isfinite(eps))
        for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = add_dp_noise(cols[c], eps, 1.0, mix64(seed) + c);
      per_seed[si].push_back({"linear_curated", eps, seed, cfg.steps, detail::curated_final_loss(s, cols, cfg, seed)});
    }
  });
  for (auto& rows : per_seed) out.finals.insert(out.finals.end(), rows.begin(), rows.end());
  return out;
}

inline ExperimentResult run_random_bag_sweep(const ExperimentConfig& cfg) {
  ExperimentResult out{"random_bag_sweep", {}, {}};
  std::vector<std::vector<ExperimentRow>> per_seed(cfg.seeds);
  detail::for_each_seed(cfg, [&](std::size_t si) {
    const std::uint64_t seed = cfg.base_seed + si;
    const auto task = make_synthetic(cfg.data, seed);
    for (std::size_t m : cfg.bag_sizes)
      per_seed[si].push_back({"random_bags", static_cast<double>(m), seed, cfg.rb_steps,
                              detail::random_bag_final_loss(task, cfg, m, seed)});
  });
  for (auto& rows : per_seed) out.finals.insert(out.finals.end(), rows.begin(), rows.end());
  return out;
}

inline ExperimentResult run_curated_vs_random(const ExperimentConfig& cfg) {
  ExperimentResult out{"curated_vs_random", {}, {}};
  std::vector<std::vector<ExperimentRow>> per_seed(cfg.seeds);
  detail::for_each_seed(cfg, [&](std::size_t si) {
    const std::uint64_t seed = cfg.base_seed + si;
    const auto task = make_synthetic(cfg.data, seed);
    const auto s = make_curated_setup(task, cfg, CuratedArch::kLinear, seed);
    per_seed[si].push_back({"curated", 0.0, seed, cfg.steps, detail::curated_final_loss(s, s.collections, cfg, seed)});
    per_seed[si].push_back({"random_bags", static_cast<double>(cfg.compare_bag_size), seed, cfg.rb_steps,
                            detail::random_bag_final_loss(task, cfg, cfg.compare_bag_size, seed)});
  });
  for (auto& rows : per_seed) out.finals.insert(out.finals.end(), rows.begin(), rows.end());
  return out;
}

inline ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "noise_free") return run_noise_free(cfg);
  if (name == "dp_sweep") return run_dp_sweep(cfg);
  if (name == "random_bag_sweep") return run_random_bag_sweep(cfg);
  if (name == "curated_vs_random") return run_curated_vs_random(cfg);
  throw Error("unknown experiment '" + name +
              "' (expected noise_free, dp_sweep, random_bag_sweep or curated_vs_random)");
}

// Mean final test log loss per parameter value for one series, in ascending
// parameter order.
inline std::vector<std::pair<double, double>> mean_by_param(const ExperimentResult& r, const std::string& series) {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& row : r.finals)
    if (row.series == series) {
      acc[row.param].first += row.test_log_loss;
      ++acc[row.param].second;
    }
  std::vector<std::pair<double, double>> out;
  for (const auto& [param, sum_count] : acc)
    out.emplace_back(param, sum_count.first / static_cast<double>(sum_count.second));
  return out;
}

}  // namespace aggbag

#endif  // AGGBAG_EXPERIMENT_HPP_
