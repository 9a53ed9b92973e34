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

#ifndef AGGBAG_BAGGING_HPP_
#define AGGBAG_BAGGING_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aggbag/common.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/rng.hpp"

namespace aggbag {

// Sorted, duplicate-free, non-empty set of feature column indices.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(std::vector<std::size_t> columns) : columns_(std::move(columns)) {
    std::sort(columns_.begin(), columns_.end());
    columns_.erase(std::unique(columns_.begin(), columns_.end()), columns_.end());
    if (columns_.empty()) throw Error("feature set must be non-empty");
  }

  const std::vector<std::size_t>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }

  bool contains_all(std::span<const std::size_t> cols) const {
    return std::all_of(cols.begin(), cols.end(),
                       [&](std::size_t c) { return std::binary_search(columns_.begin(), columns_.end(), c); });
  }

  void check_against(std::size_t d) const {
    for (std::size_t c : columns_)
      if (c >= d) throw Error("feature set references column " + std::to_string(c) + " but d = " + std::to_string(d));
  }

  auto operator<=>(const FeatureSet&) const = default;

 private:
  std::vector<std::size_t> columns_;
};

inline FeatureSet feature_set_by_names(const FeatureSchema& schema, const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(schema.column_index(n));
  return FeatureSet(std::move(cols));
}

struct AggregateBag {
  std::vector<std::uint32_t> key;     // vocabulary indices over the feature set's columns
  std::vector<std::size_t> members;   // ascending example indices
  Vector aggregate_label;
  bool noised = false;

  std::size_t size() const { return members.size(); }
};

struct BagCollection {
  FeatureSet feature_set;
  std::vector<AggregateBag> bags;  // ascending key order
  std::size_t filtered_count = 0;
  std::size_t min_bag_size = 1;
  std::optional<double> epsilon;
  std::optional<double> label_range;
  std::optional<std::uint64_t> seed;

  std::size_t retained() const {
    std::size_t n = 0;
    for (const auto& b : bags) n += b.size();
    return n;
  }
};

using LabelTransform = std::function<Vector(std::span<const double>)>;

inline Vector identity_transform(std::span<const double> y) { return {y.begin(), y.end()}; }

// One bag per observed value combination on `fs`. Bags with fewer than
// min_bag_size members are dropped and counted in filtered_count.
inline BagCollection curated_bags(const Dataset& ds, const FeatureSet& fs,
                                  const LabelTransform& transform = identity_transform,
                                  std::size_t min_bag_size = 1) {
  if (ds.N() == 0) throw Error("curated_bags: empty dataset");
  if (min_bag_size < 1) throw Error("curated_bags: min_bag_size must be >= 1");
  fs.check_against(ds.d());

  std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> groups;
  std::vector<std::uint32_t> key(fs.size());
  for (std::size_t i = 0; i < ds.N(); ++i) {
    for (std::size_t c = 0; c < fs.size(); ++c) key[c] = ds.features.at(i, fs.columns()[c]);
    groups[key].push_back(i);
  }

  BagCollection out;
  out.feature_set = fs;
  out.min_bag_size = min_bag_size;
  for (auto& [k, members] : groups) {
    if (members.size() < min_bag_size) {
      out.filtered_count += members.size();
      continue;
    }
    AggregateBag bag;
    bag.key = k;
    Vector sum;
    for (std::size_t i : members) {
      const Vector t = transform(ds.labels.row(i));
      if (sum.empty()) sum.assign(t.size(), 0.0);
      for (std::size_t j = 0; j < t.size(); ++j) sum[j] += t[j];
    }
    const auto m = static_cast<double>(members.size());
    for (double& s : sum) s /= m;
    bag.aggregate_label = std::move(sum);
    bag.members = std::move(members);
    out.bags.push_back(std::move(bag));
  }
  return out;
}

inline std::vector<BagCollection> multi_curated_bags(const Dataset& ds, const std::vector<FeatureSet>& feature_sets,
                                                     const LabelTransform& transform = identity_transform,
                                                     std::size_t min_bag_size = 1) {
  if (feature_sets.empty()) throw Error("multi_curated_bags: no feature sets");
  std::set<FeatureSet> seen;
  for (const auto& fs : feature_sets)
    if (!seen.insert(fs).second) throw Error("multi_curated_bags: duplicate feature set");
  std::vector<BagCollection> out;
  out.reserve(feature_sets.size());
  for (const auto& fs : feature_sets) out.push_back(curated_bags(ds, fs, transform, min_bag_size));
  return out;
}

// Per-bag scale of the double-exponential noise added to each aggregate entry.
inline double dp_noise_scale(std::size_t bag_size, double epsilon, double label_range) {
  return label_range / (static_cast<double>(bag_size) * epsilon);
}

// Adds independent double-exponential noise with scale label_range / (m_b eps)
// to every aggregate entry. Bag b draws from stream b of `seed`, so the same
// seed yields the same unit draws at every epsilon.
inline BagCollection add_dp_noise(const BagCollection& collection, double epsilon, double label_range,
                                  std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw Error("add_dp_noise: epsilon must be positive");
  if (!(label_range > 0.0)) throw Error("add_dp_noise: label_range must be positive");
  BagCollection out = collection;
  out.epsilon = epsilon;
  out.label_range = label_range;
  out.seed = seed;
  for (std::size_t b = 0; b < out.bags.size(); ++b) {
    auto& bag = out.bags[b];
    if (bag.size() == 0) throw Error("add_dp_noise: empty bag");
    CounterRng rng(seed, b);
    const double scale = dp_noise_scale(bag.size(), epsilon, label_range);
    for (double& v : bag.aggregate_label) v += rng.laplace(scale);
    bag.noised = true;
  }
  return out;
}

struct RandomBagSample {
  std::vector<std::size_t> members;
  Vector aggregate_label;  // entries in {0, 1}
};

// m distinct examples drawn uniformly; each label entry is Bernoulli with the
// members' mean label as parameter.
inline RandomBagSample random_bag_sample(const Dataset& ds, std::size_t m, CounterRng& rng) {
  if (m < 1) throw Error("random_bag_sample: m must be >= 1");
  if (m > ds.N()) throw Error("random_bag_sample: m exceeds N");
  if (!ds.binary_labels) throw Error("random_bag_sample: requires binary labels");
  RandomBagSample s;
  s.members = sample_without_replacement(ds.N(), m, rng);
  s.aggregate_label.assign(ds.K(), 0.0);
  for (std::size_t k = 0; k < ds.K(); ++k) {
    double sum = 0.0;
    for (std::size_t i : s.members) sum += ds.labels(i, k);
    s.aggregate_label[k] = rng.bernoulli(sum / static_cast<double>(m)) ? 1.0 : 0.0;
  }
  return s;
}

// JSON-lines: one header record, then one record per bag.
inline void write_collection_jsonl(std::ostream& out, const BagCollection& col, const FeatureSchema& schema) {
  using nlohmann::json;
  json header = {{"type", "header"},
                 {"feature_indices", col.feature_set.columns()},
                 {"min_bag_size", col.min_bag_size},
                 {"filtered_count", col.filtered_count}};
  json names = json::array();
  for (std::size_t c : col.feature_set.columns()) names.push_back(schema.columns.at(c).name);
  header["feature_set"] = names;
  header["epsilon"] = col.epsilon ? json(*col.epsilon) : json(nullptr);
  header["label_range"] = col.label_range ? json(*col.label_range) : json(nullptr);
  header["seed"] = col.seed ? json(*col.seed) : json(nullptr);
  out << header.dump() << '\n';
  for (const auto& bag : col.bags) {
    json values = json::array();
    for (std::size_t c = 0; c < bag.key.size(); ++c)
      values.push_back(schema.columns.at(col.feature_set.columns()[c]).values.at(bag.key[c]));
    json rec = {{"type", "bag"},       {"key", bag.key},         {"key_values", values},
                {"members", bag.members}, {"aggregate_label", bag.aggregate_label}, {"noised", bag.noised}};
    out << rec.dump() << '\n';
  }
}

inline BagCollection read_collection_jsonl(std::istream& in) {
  using nlohmann::json;
  std::string line;
  if (!std::getline(in, line)) throw Error("bag file: missing header");
  const json header = json::parse(line);
  if (header.value("type", "") != "header") throw Error("bag file: first record is not a header");
  BagCollection col;
  col.feature_set = FeatureSet(header.at("feature_indices").get<std::vector<std::size_t>>());
  col.min_bag_size = header.at("min_bag_size").get<std::size_t>();
  col.filtered_count = header.at("filtered_count").get<std::size_t>();
  if (!header.at("epsilon").is_null()) col.epsilon = header["epsilon"].get<double>();
  if (!header.at("label_range").is_null()) col.label_range = header["label_range"].get<double>();
  if (!header.at("seed").is_null()) col.seed = header["seed"].get<std::uint64_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    AggregateBag bag;
    bag.key = rec.at("key").get<std::vector<std::uint32_t>>();
    bag.members = rec.at("members").get<std::vector<std::size_t>>();
    bag.aggregate_label = rec.at("aggregate_label").get<Vector>();
    bag.noised = rec.at("noised").get<bool>();
    col.bags.push_back(std::move(bag));
  }
  return col;
}

}  // namespace aggbag

#endif  // AGGBAG_BAGGING_HPP_
