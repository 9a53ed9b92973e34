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

#ifndef AGGBAG_SYNTHETIC_HPP_
#define AGGBAG_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "aggbag/common.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/rng.hpp"

namespace aggbag {

// Ground-truth GAM with a logistic link: logit(x) = bias + sum_i main_i[x_i]
// + sum_{pairs} inter_pq[x_p, x_q]. Features are uniform over their vocabularies.
struct SyntheticConfig {
  std::size_t n_train = 5000;
  std::size_t n_test = 5000;
  std::vector<std::size_t> vocab_sizes = {8, 8, 8, 8, 8, 8};
  std::vector<std::pair<std::size_t, std::size_t>> interactions = {{0, 1}, {2, 3}, {4, 5}};
  double main_scale = 0.6;
  double interaction_scale = 1.0;
  double bias = -0.3;
};

struct SyntheticTask {
  Dataset train;
  Dataset test;
};

inline FeatureSchema synthetic_schema(const std::vector<std::size_t>& vocab_sizes, std::size_t K = 1) {
  FeatureSchema schema;
  for (std::size_t c = 0; c < vocab_sizes.size(); ++c) {
    Column col;
    col.name = "F" + std::to_string(c + 1);
    for (std::size_t v = 0; v < vocab_sizes[c]; ++v) col.intern("v" + std::to_string(v));
    schema.columns.push_back(std::move(col));
  }
  for (std::size_t k = 0; k < K; ++k) schema.label_names.push_back(K == 1 ? "y" : "y" + std::to_string(k));
  return schema;
}

inline FeatureTable uniform_features(const std::vector<std::size_t>& vocab_sizes, std::size_t n, CounterRng& rng) {
  FeatureTable t;
  std::vector<std::uint32_t> row(vocab_sizes.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < vocab_sizes.size(); ++c) row[c] = static_cast<std::uint32_t>(rng.below(vocab_sizes[c]));
    t.push_back(row);
  }
  return t;
}

inline SyntheticTask make_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  CounterRng truth_rng(seed, 1);
  std::vector<Vector> main_effects;
  for (std::size_t v : cfg.vocab_sizes) {
    Vector t(v);
    for (double& w : t) w = cfg.main_scale * truth_rng.normal();
    main_effects.push_back(std::move(t));
  }
  std::vector<Vector> inter;
  for (auto [p, q] : cfg.interactions) {
    if (p >= cfg.vocab_sizes.size() || q >= cfg.vocab_sizes.size()) throw Error("synthetic: bad interaction");
    Vector t(cfg.vocab_sizes[p] * cfg.vocab_sizes[q]);
    for (double& w : t) w = cfg.interaction_scale * truth_rng.normal();
    inter.push_back(std::move(t));
  }

  auto draw = [&](std::size_t n, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Dataset ds;
    ds.schema = synthetic_schema(cfg.vocab_sizes);
    ds.features = uniform_features(cfg.vocab_sizes, n, rng);
    ds.labels = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = ds.features.row(i);
      double z = cfg.bias;
      for (std::size_t c = 0; c < x.size(); ++c) z += main_effects[c][x[c]];
      for (std::size_t t = 0; t < cfg.interactions.size(); ++t) {
        auto [p, q] = cfg.interactions[t];
        z += inter[t][x[p] * cfg.vocab_sizes[q] + x[q]];
      }
      ds.labels(i, 0) = rng.bernoulli(logistic(z)) ? 1.0 : 0.0;
    }
    return ds;
  };
  return {draw(cfg.n_train, 2), draw(cfg.n_test, 3)};
}

// Binary K = 1 labels as two-class one-hot rows (1 - y, y).
inline Dataset to_one_hot(const Dataset& ds) {
  if (ds.K() != 1) throw Error("to_one_hot: expects K = 1");
  Dataset out = ds;
  out.labels = Matrix(ds.N(), 2);
  for (std::size_t i = 0; i < ds.N(); ++i) {
    out.labels(i, 0) = 1.0 - ds.labels(i, 0);
    out.labels(i, 1) = ds.labels(i, 0);
  }
  out.schema.label_names = {"not_" + ds.schema.label_names.at(0), ds.schema.label_names.at(0)};
  return out;
}

// Serialises a dataset back to CSV (features, then labels).
inline std::string to_csv(const Dataset& ds, char delim = ',') {
  std::string out;
  for (const auto& c : ds.schema.columns) out += c.name + delim;
  for (std::size_t k = 0; k < ds.K(); ++k) out += ds.schema.label_names.at(k) + (k + 1 < ds.K() ? std::string(1, delim) : "");
  out += '\n';
  for (std::size_t i = 0; i < ds.N(); ++i) {
    for (std::size_t c = 0; c < ds.d(); ++c) out += ds.schema.columns[c].values[ds.features.at(i, c)] + delim;
    for (std::size_t k = 0; k < ds.K(); ++k) {
      const double v = ds.labels(i, k);
      out += (v == static_cast<long long>(v) ? std::to_string(static_cast<long long>(v)) : std::to_string(v));
      if (k + 1 < ds.K()) out += delim;
    }
    out += '\n';
  }
  return out;
}

}  // namespace aggbag

#endif  // AGGBAG_SYNTHETIC_HPP_
