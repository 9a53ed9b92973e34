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

#include "aggbag/gam.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "aggbag/synthetic.hpp"
#include "test_util.hpp"

namespace aggbag {
namespace {

struct Fixture {
  FeatureSchema schema;
  FeatureTable table;
};

Fixture random_fixture(std::uint64_t seed, std::vector<std::size_t> vocab, std::size_t n) {
  CounterRng rng(seed);
  Fixture f;
  f.schema = synthetic_schema(vocab);
  f.table = uniform_features(vocab, n, rng);
  return f;
}

void randomize(GamModel& model, std::uint64_t seed, double scale) {
  CounterRng rng(seed, 77);
  for (double& b : model.beta) b = rng.uniform(-scale, scale);
}

TEST(Gam, LinearCrossTableLookup) {
  const auto f = random_fixture(1, {2}, 50);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  GamModel model = builder.build(0);
  ASSERT_EQ(model.p(), 2u);
  model.beta = {0.2, -0.5};
  EXPECT_DOUBLE_EQ(forward(model, std::vector<std::uint32_t>{0})[0], 0.2);
  EXPECT_DOUBLE_EQ(forward(model, std::vector<std::uint32_t>{1})[0], -0.5);
}

TEST(Gam, ZeroParametersGiveZeroOutput) {
  const auto f = random_fixture(2, {3, 4, 2}, 80);
  GamBuilder builder(f.schema, f.table, 2);
  builder.add_linear_cross({0, 1});
  builder.add_mlp({1, 2}, {5, 3});
  GamModel model = builder.build(9);
  std::fill(model.beta.begin(), model.beta.end(), 0.0);
  for (std::size_t i = 0; i < f.table.size(); ++i)
    for (double v : forward(model, f.table.row(i))) EXPECT_EQ(v, 0.0);
}

TEST(Gam, OutputIsSumOfSubModels) {
  const auto f = random_fixture(3, {3, 3}, 40);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  builder.add_linear_cross({1});
  GamModel model = builder.build(0);
  const std::vector<std::uint32_t> x{f.table.at(0, 0), f.table.at(0, 1)};
  const std::size_t row0 = model.sub_models[0].combo_rows.at({x[0]});
  const std::size_t row1 = model.sub_models[1].combo_rows.at({x[1]});
  model.beta[model.sub_models[0].params[row0]] = 0.3;
  model.beta[model.sub_models[1].params[row1]] = -0.1;
  EXPECT_NEAR(forward(model, x)[0], 0.2, 1e-15);
}

TEST(Gam, InitializationFollowsKind) {
  const auto f = random_fixture(4, {3, 3}, 40);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  builder.add_mlp({1}, {4});
  const GamModel model = builder.build(5);
  for (std::size_t g : model.sub_models[0].params) EXPECT_EQ(model.beta[g], 0.0);
  bool any_nonzero = false;
  for (std::size_t g : model.sub_models[1].params) {
    EXPECT_LE(std::abs(model.beta[g]), 0.05);
    any_nonzero |= model.beta[g] != 0.0;
  }
  EXPECT_TRUE(any_nonzero);
  EXPECT_EQ(builder.build(5).beta, model.beta);
}

TEST(Gam, LinearCrossJacobianIsSelection) {
  const auto f = random_fixture(5, {2}, 30);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  const GamModel model = builder.build(0);
  const Matrix jac = sub_jacobian(model, 0, std::vector<std::uint32_t>{1});
  ASSERT_EQ(jac.rows(), 1u);
  ASSERT_EQ(jac.cols(), 2u);
  EXPECT_EQ(jac(0, 0), 0.0);
  EXPECT_EQ(jac(0, 1), 1.0);
  EXPECT_THROW(sub_jacobian(model, 1, std::vector<std::uint32_t>{0}), Error);
}

TEST(Gam, MlpJacobianAtZeroWeights) {
  const auto f = random_fixture(6, {3, 2}, 30);
  const std::size_t K = 2, H = 4;
  GamBuilder builder(f.schema, f.table, K);
  builder.add_mlp({0, 1}, {H});
  GamModel model = builder.build(1);
  std::fill(model.beta.begin(), model.beta.end(), 0.0);
  const Matrix jac = sub_jacobian(model, 0, std::vector<std::uint32_t>{2, 1});
  const std::size_t in = 5;
  const std::size_t layer1 = H * in + H;
  ASSERT_EQ(jac.cols(), layer1 + K * H + K);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t s = 0; s < jac.cols(); ++s) {
      const bool own_bias = s == layer1 + K * H + k;
      EXPECT_EQ(jac(k, s), own_bias ? 1.0 : 0.0) << "k=" << k << " s=" << s;
    }
}

// Central differences of the composite forward against the sum of
// sub-Jacobian contributions, so shared parameters are covered too.
void expect_jacobian_matches_fd(const GamModel& base, const FeatureTable& table, std::size_t rows) {
  const double h = 1e-6;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto x = table.row(i);
    for (std::size_t k = 0; k < base.K; ++k) {
      Vector analytic(base.p(), 0.0);
      Vector r(base.K, 0.0);
      r[k] = 1.0;
      for (std::size_t j = 0; j < base.sub_models.size(); ++j)
        accumulate_jacobian_transpose(base, j, project(x, base.sub_models[j].features), r, analytic);
      for (std::size_t g = 0; g < base.p(); ++g) {
        GamModel up = base, dn = base;
        up.beta[g] += h;
        dn.beta[g] -= h;
        const double fd = (forward(up, x)[k] - forward(dn, x)[k]) / (2.0 * h);
        EXPECT_LE(std::abs(fd - analytic[g]) / std::max(1.0, std::abs(analytic[g])), 1e-5)
            << "row " << i << " k " << k << " param " << g;
      }
    }
  }
}

TEST(Gam, JacobianMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = random_fixture(10 + seed, {3, 2, 4}, 40);
    GamBuilder builder(f.schema, f.table, 2);
    builder.add_linear_cross({0, 2});
    builder.add_mlp({1, 2}, {3, 2});
    builder.add_mlp({0}, {4});
    GamModel model = builder.build(seed);
    randomize(model, seed, 0.9);
    expect_jacobian_matches_fd(model, f.table, 4);
  }
}

TEST(Gam, SharedParameterGradientSumsContributions) {
  const auto f = random_fixture(20, {3, 3}, 40);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  builder.add_mlp({1}, {3});
  builder.add_linear_cross({0, 1});
  builder.share(0, 0, 1, 2);
  builder.share(0, 1, 2, 0);
  GamModel model = builder.build(3);
  randomize(model, 3, 0.7);
  EXPECT_EQ(model.sub_models[1].params[2], model.sub_models[0].params[0]);
  EXPECT_EQ(model.sub_models[2].params[0], model.sub_models[0].params[1]);
  expect_jacobian_matches_fd(model, f.table, 10);
}

TEST(Gam, SharingErrors) {
  const auto f = random_fixture(21, {3, 3}, 40);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  builder.add_linear_cross({1});
  EXPECT_THROW(builder.share(0, 0, 0, 1), Error);
  EXPECT_THROW(builder.share(0, 99, 1, 0), Error);
  EXPECT_THROW(builder.share(0, 0, 5, 0), Error);
  builder.share(0, 0, 1, 0);
  EXPECT_THROW(builder.share(0, 0, 1, 1), Error);
}

TEST(Gam, EveryParameterMustBeUsed) {
  const auto f = random_fixture(22, {2}, 20);
  GamBuilder builder(f.schema, f.table, 1);
  builder.add_linear_cross({0});
  GamModel model = builder.build(0);
  model.beta.push_back(0.0);
  EXPECT_THROW(validate_model(model), Error);
}

TEST(Gam, UnseenCombinationPolicy) {
  FeatureSchema schema = synthetic_schema({3});
  FeatureTable table;
  table.push_back(std::vector<std::uint32_t>{0});
  table.push_back(std::vector<std::uint32_t>{1});
  GamBuilder builder(schema, table, 1);
  builder.add_linear_cross({0});
  GamModel strict = builder.build(0);
  strict.beta = {1.0, 2.0};
  EXPECT_THROW(forward(strict, std::vector<std::uint32_t>{2}), Error);
  GamModel lenient = builder.build(0, UnseenPolicy::kZero);
  lenient.beta = {1.0, 2.0};
  EXPECT_EQ(forward(lenient, std::vector<std::uint32_t>{2})[0], 0.0);
}

TEST(ValidatePhi, Examples) {
  const Dataset ds = testing::toy_table();
  const auto cols = multi_curated_bags(ds, {FeatureSet({0}), FeatureSet({1, 2})});
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({0});
  builder.add_linear_cross({1});
  const auto phi = validate_phi(builder.build(0), cols);
  EXPECT_EQ(phi, (std::vector<std::size_t>{0, 1}));

  const auto only_pair = multi_curated_bags(ds, {FeatureSet({1, 2})});
  GamBuilder b2(ds.schema, ds.features, 1);
  b2.add_linear_cross({1});
  EXPECT_EQ(validate_phi(b2.build(0), only_pair), std::vector<std::size_t>{0});

  const auto only_first = multi_curated_bags(ds, {FeatureSet({0})});
  GamBuilder b3(ds.schema, ds.features, 1);
  b3.add_linear_cross({3});
  try {
    validate_phi(b3.build(0), only_first);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sub-model 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("{3}"), std::string::npos);
  }
}

TEST(ValidatePhi, PrefersSmallestCoveringSet) {
  const Dataset ds = testing::toy_table();
  const auto cols = multi_curated_bags(ds, {FeatureSet({0, 1, 2}), FeatureSet({1, 2}), FeatureSet({1, 3})});
  GamBuilder builder(ds.schema, ds.features, 1);
  builder.add_linear_cross({1});
  builder.add_linear_cross({0, 1});
  EXPECT_EQ(validate_phi(builder.build(0), cols), (std::vector<std::size_t>{1, 0}));
}

TEST(Gam, JacobianConstantWithinBag) {
  const auto f = random_fixture(30, {3, 4, 2}, 150);
  Dataset ds;
  ds.schema = f.schema;
  ds.features = f.table;
  ds.labels = Matrix(f.table.size(), 1);
  const auto cols = multi_curated_bags(ds, {FeatureSet({0, 1}), FeatureSet({2})});
  GamBuilder builder(f.schema, f.table, 2);
  builder.add_mlp({0}, {3});
  builder.add_linear_cross({0, 1});
  builder.add_mlp({2}, {2});
  GamModel model = builder.build(4);
  randomize(model, 4, 0.5);
  const auto phi = validate_phi(model, cols);
  for (std::size_t j = 0; j < model.sub_models.size(); ++j)
    for (const auto& bag : cols[phi[j]].bags) {
      const auto& feats = model.sub_models[j].features;
      const Matrix first = sub_jacobian(model, j, project(f.table.row(bag.members[0]), feats));
      for (std::size_t i : bag.members) EXPECT_EQ(sub_jacobian(model, j, project(f.table.row(i), feats)), first);
    }
}

TEST(Gam, ConfigBuildsModel) {
  const Dataset ds = testing::toy_table();
  const auto config = nlohmann::json::parse(R"({
    "submodels": [{"features": ["F1"], "kind": "linear_cross"},
                  {"features": ["F2", "F3"], "kind": "mlp", "hidden": [3]}],
    "share": [{"from": [0, 0], "to": [1, 0]}]})");
  const GamModel model = build_model_from_config(config, ds.schema, ds.features, 1, 7);
  ASSERT_EQ(model.sub_models.size(), 2u);
  EXPECT_EQ(model.sub_models[1].kind, SubModelKind::kMlp);
  EXPECT_EQ(model.sub_models[1].params[0], model.sub_models[0].params[0]);
  // 2 cross rows + mlp (3*(2+2)+3 + 1*3+1) - 1 shared.
  EXPECT_EQ(model.p(), 2u + 19u - 1u);
  EXPECT_EQ(config_hash(config).size(), 16u);
  EXPECT_THROW(build_model_from_config(nlohmann::json::parse(R"({"submodels": []})"), ds.schema, ds.features, 1, 0),
               Error);
  EXPECT_THROW(build_model_from_config(nlohmann::json::parse(R"({"submodels": [{"features": ["F1"], "kind": "tree"}]})"),
                                       ds.schema, ds.features, 1, 0),
               Error);
}

TEST(Checkpoint, RoundTrip) {
  const std::string path = ::testing::TempDir() + "/aggbag_ckpt.bin";
  const Vector beta{0.1, -2.5, 1e-300, 3.0};
  const std::string hash = hex_digest("config");
  write_checkpoint(path, beta, hash);
  EXPECT_EQ(std::filesystem::file_size(path), 4u + 4u + 16u + 8u + 4u * 8u);
  EXPECT_EQ(read_checkpoint(path, hash), beta);
  EXPECT_THROW(read_checkpoint(path, hex_digest("other")), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace aggbag
