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

#ifndef AGGBAG_VERIFY_HPP_
#define AGGBAG_VERIFY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aggbag/bagging.hpp"
#include "aggbag/gam.hpp"
#include "aggbag/semilinear_loss.hpp"
#include "aggbag/synthetic.hpp"
#include "aggbag/train.hpp"

namespace aggbag {

// End-to-end comparison of the aggregate-label gradient against the
// individual-label gradient on small random problems.

struct LosslessCase {
  LossKind loss = LossKind::kMse;
  SubModelKind kind = SubModelKind::kLinearCross;
  bool sharing = false;
  std::uint64_t seed = 0;
};

inline std::string describe(const LosslessCase& c) {
  const char* loss = c.loss == LossKind::kMse ? "mse" : c.loss == LossKind::kLogLoss ? "logloss" : "poisson";
  return std::string("loss=") + loss + " submodel=" + (c.kind == SubModelKind::kMlp ? "mlp" : "linear_cross") +
         " sharing=" + (c.sharing ? "on" : "off") + " seed=" + std::to_string(c.seed);
}

// A random problem: N <= 200, d = 6, |V_i| <= 5, K <= 3, with sub-models on
// {F1}, {F2,F3}, {F4}, {F2} and collections {F1}, {F2,F3}, {F4,F5}.
struct LosslessProblem {
  Dataset data;
  GamModel model;
  std::vector<BagCollection> collections;
  std::vector<std::size_t> phi;
  SemilinearLoss loss;
};

inline LosslessProblem make_lossless_problem(const LosslessCase& c) {
  CounterRng rng(c.seed, 0x1055);
  LosslessProblem p;
  const std::size_t N = 40 + rng.below(161);
  std::vector<std::size_t> vocab(6);
  for (auto& v : vocab) v = 2 + rng.below(4);
  std::size_t K = 1;
  switch (c.loss) {
    case LossKind::kMse: K = 2 + rng.below(2); p.loss = mse_loss(); break;
    case LossKind::kLogLoss: K = 3; p.loss = log_loss(); break;
    case LossKind::kPoisson: K = 1; p.loss = poisson_loss(); break;
    default: throw Error("lossless: custom losses are not part of the matrix");
  }
  p.data.schema = synthetic_schema(vocab, K);
  p.data.features = uniform_features(vocab, N, rng);
  p.data.labels = Matrix(N, K);
  for (std::size_t i = 0; i < N; ++i) {
    if (c.loss == LossKind::kLogLoss) {
      p.data.labels(i, rng.below(K)) = 1.0;
    } else {
      for (std::size_t k = 0; k < K; ++k) p.data.labels(i, k) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
  }

  GamBuilder b(p.data.schema, p.data.features, K);
  const std::vector<std::vector<std::size_t>> subs = {{0}, {1, 2}, {3}, {1}};
  for (const auto& f : subs) {
    if (c.kind == SubModelKind::kMlp) b.add_mlp(f, {4});
    else b.add_linear_cross(f);
  }
  if (c.sharing) {
    b.share(0, 0, 1, 0);
    b.share(1, 1, 3, 1);
  }
  p.model = b.build(c.seed);
  const double spread = c.loss == LossKind::kPoisson ? 0.3 : 0.8;
  for (double& v : p.model.beta) v = rng.uniform(-spread, spread);

  p.collections = multi_curated_bags(p.data, {FeatureSet({0}), FeatureSet({1, 2}), FeatureSet({3, 4})}, p.loss.transform);
  p.phi = validate_phi(p.model, p.collections);
  return p;
}

struct LosslessResult {
  LosslessCase config;
  double deviation = 0.0;  // ||agg - ind||_inf / (1 + ||ind||_inf)
};

// With `sabotage`, the {F2,F3} sub-model is routed to the {F1} collection,
// which violates the covering hypothesis.
inline LosslessResult run_lossless_case(const LosslessCase& c, bool sabotage = false) {
  auto p = make_lossless_problem(c);
  if (sabotage) p.phi[1] = 0;
  const auto ind = individual_gradient(p.model, p.data, p.loss);
  const auto agg = aggregate_gradient(p.model, p.data.features, p.collections, p.loss, p.phi);
  return {c, relative_inf_deviation(agg.grad, ind.grad)};
}

struct LosslessReport {
  std::vector<LosslessResult> results;
  double max_deviation = 0.0;
  std::optional<LosslessCase> worst;
};

inline LosslessReport run_lossless_matrix(const std::vector<LossKind>& losses, const std::vector<SubModelKind>& kinds,
                                          const std::vector<bool>& sharing, std::size_t seeds, std::uint64_t base_seed,
                                          bool sabotage = false) {
  LosslessReport rep;
  for (LossKind l : losses)
    for (SubModelKind k : kinds)
      for (bool s : sharing)
        for (std::size_t t = 0; t < seeds; ++t) {
          auto r = run_lossless_case({l, k, s, base_seed + t}, sabotage);
          if (!rep.worst || r.deviation > rep.max_deviation) {
            rep.max_deviation = r.deviation;
            rep.worst = r.config;
          }
          rep.results.push_back(r);
        }
  return rep;
}

}  // namespace aggbag

#endif  // AGGBAG_VERIFY_HPP_
