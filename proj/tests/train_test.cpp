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

#include "aggbag/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "aggbag/synthetic.hpp"
#include "aggbag/verify.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace aggbag {
namespace {

// One feature with a single value: a LinearCross on it is the constant f = beta.
Dataset constant_feature_dataset(const std::vector<double>& labels) {
  Dataset ds;
  ds.schema = synthetic_schema({1});
  ds.labels = Matrix(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ds.features.push_back(std::vector<std::uint32_t>{0});
    ds.labels(i, 0) = labels[i];
  }
  return ds;
}

TEST(IndividualGradient, ConstantSubModel) {
  const Dataset ds = constant_feature_dataset({0, 1, 1});
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({0});
  const GamModel model = builder.build(0);
  const auto rep = individual_gradient(model, ds, mse_loss());
  ASSERT_EQ(rep.grad.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.grad[0], -2.0);
  EXPECT_EQ(rep.mode, GradientMode::kIndividual);
}

TEST(AggregateGradient, ConstantSubModel) {
  const Dataset ds = constant_feature_dataset({0, 1, 1});
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({0});
  const GamModel model = builder.build(0);
  const std::vector<BagCollection> cols{curated_bags(ds, FeatureSet({0}))};
  ASSERT_EQ(cols[0].bags.size(), 1u);
  EXPECT_DOUBLE_EQ(cols[0].bags[0].aggregate_label[0], 2.0 / 3.0);
  const std::vector<std::size_t> phi{0};
  const auto rep = aggregate_gradient(model, ds.features, cols, mse_loss(), phi);
  EXPECT_NEAR(rep.grad[0], -2.0, 1e-15);
  EXPECT_EQ(rep.bags_visited, 1u);
  EXPECT_EQ(rep.mode, GradientMode::kAggregate);
}

TEST(IndividualGradient, ZeroAtInterpolatingSolution) {
  const Dataset ds = testing::toy_table();
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({0, 1, 2, 3});
  GamModel model = builder.build(0);
  for (std::size_t i = 0; i < ds.N(); ++i) {
    const auto& sm = model.sub_models[0];
    const auto key = project(ds.features.row(i), sm.features);
    model.beta[sm.params[sm.combo_rows.at(key)]] = ds.labels(i, 0);
  }
  for (double g : individual_gradient(model, ds, mse_loss()).grad) EXPECT_EQ(g, 0.0);
}

TEST(AggregateGradient, ZeroWhenPredictionEqualsBagMean) {
  const Dataset ds = testing::toy_table();
  const std::vector<BagCollection> cols{curated_bags(ds, FeatureSet({0}))};
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({0});
  GamModel model = builder.build(0);
  model.beta = {cols[0].bags[0].aggregate_label[0], cols[0].bags[1].aggregate_label[0]};
  const std::vector<std::size_t> phi{0};
  const auto agg = aggregate_gradient(model, ds.features, cols, mse_loss(), phi);
  const auto ind = individual_gradient(model, ds, mse_loss());
  for (std::size_t g = 0; g < model.p(); ++g) {
    EXPECT_NEAR(agg.grad[g], 0.0, 1e-15);
    EXPECT_NEAR(ind.grad[g], 0.0, 1e-15);
  }
}

TEST(IndividualGradient, MatchesFiniteDifferences) {
  for (LossKind kind : {LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson})
    for (SubModelKind sk : {SubModelKind::kLinearCross, SubModelKind::kMlp}) {
      auto p = make_lossless_problem({kind, sk, true, 3});
      const auto rep = individual_gradient(p.model, p.data, p.loss);
      EXPECT_NEAR(*rep.loss_proxy, testing::total_loss(p.model, p.data, p.loss), 1e-9);
      const Vector fd = testing::central_difference(
          [&](const Vector& b) {
            GamModel m = p.model;
            m.beta = b;
            return testing::total_loss(m, p.data, p.loss);
          },
          p.model.beta, 1e-5);
      EXPECT_LE(testing::norm_relative_error(rep.grad, fd), 1e-5) << describe({kind, sk, true, 3});
    }
}

TEST(AggregateGradient, EqualsIndividualOnMixedModel) {
  // Two sub-models sharing one parameter, collections {F1} and {F2,F3}.
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (LossKind kind : {LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson}) {
      CounterRng rng(seed, 5);
      const std::size_t K = kind == LossKind::kPoisson ? 1 : 2;
      const std::vector<std::size_t> vocab{3, 4, 2};
      Dataset ds;
      ds.schema = synthetic_schema(vocab, K);
      ds.features = uniform_features(vocab, 50, rng);
      ds.labels = Matrix(50, K);
      for (std::size_t i = 0; i < 50; ++i) {
        if (kind == LossKind::kLogLoss) ds.labels(i, rng.below(K)) = 1.0;
        else ds.labels(i, 0) = static_cast<double>(rng.below(2));
      }
      const SemilinearLoss sl =
          kind == LossKind::kMse ? mse_loss() : kind == LossKind::kLogLoss ? log_loss() : poisson_loss();
      GamBuilder builder(ds.schema, ds.features, K);
      builder.add_linear_cross({0});
      builder.add_mlp({1, 2}, {3});
      builder.share(0, 0, 1, 0);
      GamModel model = builder.build(seed);
      for (double& b : model.beta) b = rng.uniform(-0.5, 0.5);
      const auto cols = multi_curated_bags(ds, {FeatureSet({0}), FeatureSet({1, 2})});
      const auto phi = validate_phi(model, cols);
      const auto agg = aggregate_gradient(model, ds.features, cols, sl, phi);
      const auto ind = individual_gradient(model, ds, sl);
      EXPECT_LE(relative_inf_deviation(agg.grad, ind.grad), 1e-8);
    }
}

TEST(AggregateGradient, LosslessMatrixSmall) {
  const auto rep = run_lossless_matrix({LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson},
                                       {SubModelKind::kLinearCross, SubModelKind::kMlp}, {false, true}, 3, 100);
  EXPECT_EQ(rep.results.size(), 36u);
  EXPECT_LE(rep.max_deviation, 1e-8);
}

TEST(AggregateGradient, SabotagedAssignmentIsDetected) {
  const auto r = run_lossless_case({LossKind::kMse, SubModelKind::kLinearCross, false, 1}, true);
  EXPECT_GT(r.deviation, 1e-3);
}

TEST(AggregateGradient, Errors) {
  auto p = make_lossless_problem({LossKind::kMse, SubModelKind::kLinearCross, false, 2});
  EXPECT_THROW(aggregate_gradient(p.model, p.data.features, p.collections, p.loss, std::vector<std::size_t>{}), Error);
  std::vector<std::size_t> bad = p.phi;
  bad[0] = 17;
  EXPECT_THROW(aggregate_gradient(p.model, p.data.features, p.collections, p.loss, bad), Error);
  auto cols = p.collections;
  cols[0].bags[0].members.push_back(p.data.N() + 5);
  EXPECT_THROW(aggregate_gradient(p.model, p.data.features, cols, p.loss, p.phi), Error);
}

TEST(AggregateGradient, PerBagFormulaForSingleFeaturePartition) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_LE(testing::per_bag_formula_deviation(seed), 1e-10) << seed;
}

TEST(AggregateGradient, BlindToLabelPermutationWithinBags) {
  auto p = make_lossless_problem({LossKind::kMse, SubModelKind::kMlp, true, 8});
  const auto& col = p.collections[1];
  Dataset shuffled = p.data;
  CounterRng rng(8, 3);
  for (const auto& bag : col.bags) {
    std::vector<std::size_t> perm = bag.members;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t t = 0; t < perm.size(); ++t)
      for (std::size_t k = 0; k < shuffled.K(); ++k) shuffled.labels(bag.members[t], k) = p.data.labels(perm[t], k);
  }
  ASSERT_NE(shuffled.labels, p.data.labels);
  GamBuilder builder(p.data.schema, p.data.features, p.data.K());
  builder.add_mlp({1, 2}, {4});
  const GamModel model = builder.build(8);
  const std::vector<std::size_t> phi{0};
  const std::vector<BagCollection> original{curated_bags(p.data, col.feature_set)};
  const std::vector<BagCollection> permuted{curated_bags(shuffled, col.feature_set)};
  EXPECT_EQ(aggregate_gradient(model, p.data.features, original, p.loss, phi).grad,
            aggregate_gradient(model, shuffled.features, permuted, p.loss, phi).grad);
}

TEST(AggregateGradient, DeterministicAcrossRuns) {
  auto p = make_lossless_problem({LossKind::kLogLoss, SubModelKind::kMlp, true, 4});
  const auto a = aggregate_gradient(p.model, p.data.features, p.collections, p.loss, p.phi);
  const auto b = aggregate_gradient(p.model, p.data.features, p.collections, p.loss, p.phi);
  EXPECT_EQ(a.grad, b.grad);
  EXPECT_EQ(a.bags_visited, b.bags_visited);
}

TEST(TrainLoop, ZeroStepsLeavesModelUnchanged) {
  auto p = make_lossless_problem({LossKind::kMse, SubModelKind::kLinearCross, false, 1});
  TrainConfig cfg;
  cfg.steps = 0;
  const auto r = train_loop(p.model, IndividualSource{&p.data}, p.loss, cfg, &p.data);
  EXPECT_EQ(r.model.beta, p.model.beta);
  EXPECT_TRUE(r.trace.empty());
}

TEST(TrainLoop, RejectsNonPositiveLearningRate) {
  auto p = make_lossless_problem({LossKind::kMse, SubModelKind::kLinearCross, false, 1});
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train_loop(p.model, IndividualSource{&p.data}, p.loss, cfg), Error);
}

TEST(TrainLoop, TrajectoriesAgreeStepwise) {
  for (LossKind kind : {LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson})
    for (SubModelKind sk : {SubModelKind::kLinearCross, SubModelKind::kMlp})
      EXPECT_LE(testing::trajectory_gap({kind, sk, true, 11}, 50, 0.2), 1e-8) << describe({kind, sk, true, 11});
}

TEST(TrainLoop, MseLossDecreasesOnSyntheticData) {
  SyntheticConfig sc;
  sc.n_train = 2000;
  sc.n_test = 10;
  const auto task = make_synthetic(sc, 5);
  GamBuilder builder(task.train.schema, task.train.features, 1);
  for (std::size_t f = 0; f < task.train.d(); ++f) builder.add_linear_cross({f});
  for (auto [a, b] : sc.interactions) builder.add_linear_cross({a, b});
  const GamModel model = builder.build(5);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.steps = 20;
  const auto r = train_loop(model, IndividualSource{&task.train}, mse_loss(), cfg, &task.train);
  ASSERT_EQ(r.trace.size(), 20u);
  double prev = eval_metrics(model, task.train, mse_loss()).mean_loss;
  for (const auto& rec : r.trace) {
    EXPECT_LT(rec.mean_loss, prev) << "step " << rec.step;
    prev = rec.mean_loss;
  }
}

TEST(TrainLoop, MiniBatchesAreDeterministic) {
  auto p = make_lossless_problem({LossKind::kLogLoss, SubModelKind::kLinearCross, false, 6});
  TrainConfig cfg;
  cfg.learning_rate = 0.3;
  cfg.steps = 15;
  cfg.seed = 99;
  cfg.batch_bags = 2;
  const AggregateSource src{&p.data.features, &p.collections, p.phi};
  const auto a = train_loop(p.model, src, p.loss, cfg, &p.data);
  const auto b = train_loop(p.model, src, p.loss, cfg, &p.data);
  EXPECT_EQ(a.model.beta, b.model.beta);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    EXPECT_EQ(a.trace[t].mean_loss, b.trace[t].mean_loss);
    EXPECT_EQ(a.trace[t].hamming_risk, b.trace[t].hamming_risk);
  }
  EXPECT_NE(a.model.beta, p.model.beta);
}

TEST(TrainLoop, DivergenceNamesTheStep) {
  auto p = make_lossless_problem({LossKind::kPoisson, SubModelKind::kLinearCross, false, 2});
  TrainConfig cfg;
  cfg.learning_rate = 1e6;
  cfg.steps = 50;
  try {
    train_loop(p.model, IndividualSource{&p.data}, p.loss, cfg, &p.data);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("diverged at step"), std::string::npos) << e.what();
  }
}

GamModel constant_output_model(std::size_t K, const Vector& out, const Dataset& ds) {
  GamBuilder builder(ds.schema, ds.features, K);
  builder.add_linear_cross({0});
  GamModel model = builder.build(0);
  for (std::size_t k = 0; k < K; ++k) model.beta[k] = out[k];
  return model;
}

TEST(EvalMetrics, HammingRiskCases) {
  Dataset ds = constant_feature_dataset({1, 1});
  // Perfect: output 1 for label 1.
  EXPECT_EQ(*eval_metrics(constant_output_model(1, {1.0}, ds), ds, mse_loss()).hamming_risk, 0.0);
  // Wrong everywhere with K = 2.
  Dataset two = ds;
  two.labels = Matrix(2, 2);
  two.labels(0, 0) = two.labels(1, 0) = 1.0;
  two.schema.label_names = {"a", "b"};
  EXPECT_EQ(*eval_metrics(constant_output_model(2, {0.0, 1.0}, two), two, mse_loss()).hamming_risk, 2.0);
  // One wrong entry in total.
  two.labels(1, 1) = 1.0;
  EXPECT_EQ(*eval_metrics(constant_output_model(2, {1.0, 0.0}, two), two, mse_loss()).hamming_risk, 0.5);
  // Log loss predicts the argmax.
  two.labels = Matrix(2, 2);
  two.labels(0, 1) = two.labels(1, 1) = 1.0;
  const auto m = eval_metrics(constant_output_model(2, {-1.0, 2.0}, two), two, log_loss());
  EXPECT_EQ(*m.hamming_risk, 0.0);
  EXPECT_NEAR(m.mean_loss, std::log1p(std::exp(-3.0)), 1e-12);
  // Poisson has no prediction map.
  EXPECT_FALSE(eval_metrics(constant_output_model(1, {0.0}, ds), ds, poisson_loss()).hamming_risk.has_value());
}

}  // namespace
}  // namespace aggbag
