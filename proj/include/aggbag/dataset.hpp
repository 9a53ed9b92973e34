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

#ifndef AGGBAG_DATASET_HPP_
#define AGGBAG_DATASET_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aggbag/common.hpp"

namespace aggbag {

// One categorical column and its vocabulary, in first-appearance order.
struct Column {
  std::string name;
  std::vector<std::string> values;
  // Upper bucket edges when the column was numerized by bucketize().
  std::optional<std::vector<double>> numeric_buckets;

  std::uint32_t index_of(std::string_view v) const {
    auto it = lookup_.find(std::string(v));
    if (it == lookup_.end()) throw Error("unknown value '" + std::string(v) + "' in column " + name);
    return it->second;
  }
  bool contains(std::string_view v) const { return lookup_.count(std::string(v)) > 0; }

  std::uint32_t intern(std::string_view v) {
    auto [it, inserted] = lookup_.try_emplace(std::string(v), static_cast<std::uint32_t>(values.size()));
    if (inserted) values.emplace_back(v);
    return it->second;
  }

  std::size_t vocab_size() const { return values.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

struct FeatureSchema {
  std::vector<Column> columns;
  std::vector<std::string> label_names;

  std::size_t d() const { return columns.size(); }

  std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    throw Error("unknown feature column '" + std::string(name) + "'");
  }

  std::vector<std::size_t> vocab_sizes() const {
    std::vector<std::size_t> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.vocab_size());
    return out;
  }
};

// N x d vocabulary indices. Holds no labels, so code that only receives a
// FeatureTable cannot read individual labels.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::size_t n, std::size_t d) : n_(n), d_(d), data_(n * d, 0) {}

  std::size_t size() const { return n_; }
  std::size_t d() const { return d_; }

  std::span<const std::uint32_t> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  std::span<std::uint32_t> row(std::size_t i) { return {data_.data() + i * d_, d_}; }
  std::uint32_t at(std::size_t i, std::size_t col) const { return data_[i * d_ + col]; }

  void push_back(std::span<const std::uint32_t> r) {
    if (n_ == 0 && data_.empty()) d_ = r.size();
    if (r.size() != d_) throw Error("FeatureTable: row width mismatch");
    data_.insert(data_.end(), r.begin(), r.end());
    ++n_;
  }

  bool operator==(const FeatureTable&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<std::uint32_t> data_;
};

struct Example {
  std::vector<std::uint32_t> features;
  Vector label;
};

struct Dataset {
  FeatureSchema schema;
  FeatureTable features;
  Matrix labels;  // N x K
  // False when labels were loaded as real-valued regression targets; the
  // Bernoulli random-bag path requires binary labels.
  bool binary_labels = true;

  std::size_t N() const { return features.size(); }
  std::size_t d() const { return schema.d(); }
  std::size_t K() const { return labels.cols(); }

  Example example(std::size_t i) const {
    auto f = features.row(i);
    auto y = labels.row(i);
    return {{f.begin(), f.end()}, {y.begin(), y.end()}};
  }

  // Throws if any example violates the schema or label domain.
  void validate() const {
    if (labels.rows() != features.size()) throw Error("dataset: label/feature row count mismatch");
    if (features.size() > 0 && features.d() != schema.d()) throw Error("dataset: width mismatch");
    for (std::size_t i = 0; i < N(); ++i) {
      for (std::size_t c = 0; c < d(); ++c)
        if (features.at(i, c) >= schema.columns[c].vocab_size())
          throw Error("dataset: feature index out of vocabulary at row " + std::to_string(i));
      if (binary_labels)
        for (double v : labels.row(i))
          if (v != 0.0 && v != 1.0) throw Error("dataset: non-binary label at row " + std::to_string(i));
    }
  }
};

struct CsvOptions {
  char delimiter = ',';
  bool real_labels = false;
};

namespace detail {

inline std::vector<std::string> split_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline double parse_real(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw Error("unparseable label value '" + s + "' at row " + std::to_string(row) + ", column " + col);
  return v;
}

}  // namespace detail

// Reads a header-prefixed CSV. Columns named in label_columns become the label
// vector (in the given order); every other column is a categorical feature.
// When `schema` is given, its vocabularies are reused and unknown values are
// rejected (inference-time encoding).
inline Dataset read_csv(std::istream& in, const std::vector<std::string>& label_columns,
                        const CsvOptions& opts = {}, const FeatureSchema* schema = nullptr) {
  std::string line;
  if (!detail::read_line(in, line)) throw Error("csv: missing header");
  const auto header = detail::split_line(line, opts.delimiter);

  std::vector<int> label_slot(header.size(), -1);
  for (std::size_t k = 0; k < label_columns.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), label_columns[k]);
    if (it == header.end()) throw Error("csv: label column '" + label_columns[k] + "' not in header");
    label_slot[static_cast<std::size_t>(it - header.begin())] = static_cast<int>(k);
  }

  Dataset ds;
  ds.binary_labels = !opts.real_labels;
  ds.schema.label_names = label_columns;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (label_slot[c] >= 0) continue;
    feature_cols.push_back(c);
    Column col;
    col.name = header[c];
    ds.schema.columns.push_back(std::move(col));
  }
  if (schema != nullptr) {
    if (schema->d() != feature_cols.size()) throw Error("csv: feature columns do not match schema");
    for (std::size_t i = 0; i < feature_cols.size(); ++i)
      if (schema->columns[i].name != header[feature_cols[i]])
        throw Error("csv: feature column '" + header[feature_cols[i]] + "' does not match schema");
    ds.schema.columns = schema->columns;
  }

  std::vector<double> label_values;
  std::vector<std::uint32_t> row_idx(feature_cols.size());
  std::size_t row = 0;
  while (detail::read_line(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = detail::split_line(line, opts.delimiter);
    if (fields.size() != header.size())
      throw Error("csv: ragged row " + std::to_string(row) + " (" + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(header.size()) + ")");
    for (std::size_t i = 0; i < feature_cols.size(); ++i) {
      auto& col = ds.schema.columns[i];
      const auto& v = fields[feature_cols[i]];
      row_idx[i] = schema != nullptr ? col.index_of(v) : col.intern(v);
    }
    ds.features.push_back(row_idx);
    for (const auto& name : label_columns) {
      const std::size_t c = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
      const double v = detail::parse_real(fields[c], row, name);
      if (!opts.real_labels && v != 0.0 && v != 1.0)
        throw Error("csv: label value '" + fields[c] + "' at row " + std::to_string(row) + ", column " +
                    name + " is not 0 or 1");
      label_values.push_back(v);
    }
  }
  if (ds.features.size() == 0) throw Error("csv: no examples");
  ds.labels = Matrix(ds.features.size(), label_columns.size());
  for (std::size_t i = 0; i < ds.features.size(); ++i)
    for (std::size_t k = 0; k < label_columns.size(); ++k)
      ds.labels(i, k) = label_values[i * label_columns.size() + k];
  return ds;
}

inline Dataset load_csv(const std::string& path, const std::vector<std::string>& label_columns,
                        const CsvOptions& opts = {}, const FeatureSchema* schema = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("csv: cannot open '" + path + "'");
  return read_csv(in, label_columns, opts, schema);
}

// The string values of example i's features, in schema order.
inline std::vector<std::string> decode_features(const Dataset& ds, std::size_t i) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < ds.d(); ++c) out.push_back(ds.schema.columns[c].values[ds.features.at(i, c)]);
  return out;
}

struct BucketizedColumn {
  std::vector<std::string> categories;  // one per input value, "b<index>"
  std::vector<double> upper_edges;      // distinct, ascending; bucket b holds (edge[b-1], edge[b]]
};

inline std::size_t bucket_of(std::span<const double> upper_edges, double v) {
  return static_cast<std::size_t>(std::lower_bound(upper_edges.begin(), upper_edges.end(), v) -
                                  upper_edges.begin());
}

// Equal-frequency buckets. A value equal to an edge falls in the lower bucket.
inline BucketizedColumn bucketize(std::span<const double> values, int n_buckets) {
  if (n_buckets < 1) throw Error("bucketize: n_buckets must be >= 1");
  if (values.empty()) throw Error("bucketize: empty column");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto nb = static_cast<std::size_t>(n_buckets);

  BucketizedColumn out;
  for (std::size_t b = 1; b < nb; ++b) {
    const std::size_t pos = (b * n + nb - 1) / nb;  // ceil(b n / nb)
    const double edge = sorted[pos == 0 ? 0 : pos - 1];
    if (out.upper_edges.empty() || edge > out.upper_edges.back()) out.upper_edges.push_back(edge);
  }
  // An edge at the maximum leaves nothing above it.
  while (!out.upper_edges.empty() && out.upper_edges.back() >= sorted.back()) out.upper_edges.pop_back();
  out.categories.reserve(n);
  for (double v : values) out.categories.push_back("b" + std::to_string(bucket_of(out.upper_edges, v)));
  return out;
}

}  // namespace aggbag

#endif  // AGGBAG_DATASET_HPP_
