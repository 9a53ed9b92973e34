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

#ifndef AGGBAG_GAM_HPP_
#define AGGBAG_GAM_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "aggbag/bagging.hpp"
#include "aggbag/common.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/rng.hpp"

namespace aggbag {

enum class SubModelKind { kLinearCross, kMlp };

// What a LinearCross sub-model does with a value combination it has no row for.
enum class UnseenPolicy { kError, kZero };

// One sub-model f_j(x_{E'_j}; beta_{E_j}).
//
// Local parameter layout:
//   LinearCross: slot = row * K + k, one row per observed combination.
//   Mlp: for each layer, weights (out x in, row-major) followed by biases. The
//        input is the concatenated one-hot encoding of the E'_j features,
//        hidden layers use tanh, the final layer is linear with width K.
struct SubModelSpec {
  SubModelKind kind = SubModelKind::kLinearCross;
  std::vector<std::size_t> features;      // E'_j, column indices in schema order of the caller
  std::vector<std::size_t> params;        // E_j, global index of each local slot

  std::map<std::vector<std::uint32_t>, std::size_t> combo_rows;  // LinearCross

  std::vector<std::size_t> input_vocab;   // Mlp: vocabulary size per feature
  std::vector<std::size_t> hidden;        // Mlp: hidden widths

  std::size_t input_width() const {
    std::size_t w = 0;
    for (std::size_t v : input_vocab) w += v;
    return w;
  }

  // Layer widths including input and K-wide output.
  std::vector<std::size_t> layer_widths(std::size_t K) const {
    std::vector<std::size_t> w{input_width()};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(K);
    return w;
  }

  std::size_t local_param_count(std::size_t K) const {
    if (kind == SubModelKind::kLinearCross) return combo_rows.size() * K;
    const auto w = layer_widths(K);
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * w[l] + w[l + 1];
    return n;
  }
};

struct GamModel {
  Vector beta;
  std::vector<SubModelSpec> sub_models;
  std::size_t K = 1;
  UnseenPolicy unseen = UnseenPolicy::kError;

  std::size_t p() const { return beta.size(); }
};

// Checks the structural invariants: slot counts, index ranges, no duplicate
// index inside one E_j, and every parameter used by some sub-model.
inline void validate_model(const GamModel& model) {
  if (model.K == 0) throw Error("model: K must be positive");
  std::vector<bool> used(model.p(), false);
  for (std::size_t j = 0; j < model.sub_models.size(); ++j) {
    const auto& sm = model.sub_models[j];
    if (sm.features.empty()) throw Error("model: sub-model " + std::to_string(j) + " reads no features");
    if (sm.params.empty()) throw Error("model: sub-model " + std::to_string(j) + " has no parameters");
    if (sm.params.size() != sm.local_param_count(model.K))
      throw Error("model: sub-model " + std::to_string(j) + " parameter count mismatch");
    if (sm.kind == SubModelKind::kMlp && sm.input_vocab.size() != sm.features.size())
      throw Error("model: sub-model " + std::to_string(j) + " input vocabulary mismatch");
    std::set<std::size_t> local;
    for (std::size_t g : sm.params) {
      if (g >= model.p()) throw Error("model: parameter index out of range in sub-model " + std::to_string(j));
      if (!local.insert(g).second) throw Error("model: duplicate parameter index in sub-model " + std::to_string(j));
      used[g] = true;
    }
  }
  for (std::size_t g = 0; g < used.size(); ++g)
    if (!used[g]) throw Error("model: parameter " + std::to_string(g) + " is not used by any sub-model");
}

inline std::vector<std::uint32_t> project(std::span<const std::uint32_t> x, std::span<const std::size_t> cols) {
  std::vector<std::uint32_t> out(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) out[i] = x[cols[i]];
  return out;
}

namespace detail {

// Row of a LinearCross combination, or nullopt under UnseenPolicy::kZero.
inline std::optional<std::size_t> cross_row(const GamModel& model, const SubModelSpec& sm,
                                            std::span<const std::uint32_t> values) {
  auto it = sm.combo_rows.find(std::vector<std::uint32_t>(values.begin(), values.end()));
  if (it != sm.combo_rows.end()) return it->second;
  if (model.unseen == UnseenPolicy::kZero) return std::nullopt;
  throw Error("unseen feature combination for linear-cross sub-model");
}

// Activations of every Mlp layer (layer 0 is the one-hot input, implicit).
struct MlpPass {
  std::vector<std::size_t> hot;     // active input positions
  std::vector<Vector> activations;  // post-activation of layers 1..L (last is the output)
};

inline MlpPass mlp_forward(const GamModel& model, const SubModelSpec& sm, std::span<const std::uint32_t> values) {
  MlpPass pass;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= sm.input_vocab[i]) throw Error("mlp sub-model: feature value out of vocabulary");
    pass.hot.push_back(offset + values[i]);
    offset += sm.input_vocab[i];
  }
  const auto w = sm.layer_widths(model.K);
  std::size_t slot = 0;
  auto param = [&](std::size_t s) { return model.beta[sm.params[s]]; };
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::size_t in = w[l], out = w[l + 1];
    Vector z(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      if (l == 0) {
        for (std::size_t h : pass.hot) acc += param(slot + r * in + h);
      } else {
        const Vector& a = pass.activations.back();
        for (std::size_t c = 0; c < in; ++c) acc += param(slot + r * in + c) * a[c];
      }
      z[r] = acc + param(slot + out * in + r);
    }
    slot += out * in + out;
    const bool last = l + 2 == w.size();
    if (!last)
      for (double& v : z) v = std::tanh(v);
    pass.activations.push_back(std::move(z));
  }
  return pass;
}

}  // namespace detail

// Output of sub-model j at the given E'_j values.
inline Vector sub_forward(const GamModel& model, std::size_t j, std::span<const std::uint32_t> values) {
  if (j >= model.sub_models.size()) throw Error("sub_forward: invalid sub-model index");
  const auto& sm = model.sub_models[j];
  if (sm.kind == SubModelKind::kLinearCross) {
    Vector out(model.K, 0.0);
    if (auto row = detail::cross_row(model, sm, values))
      for (std::size_t k = 0; k < model.K; ++k) out[k] = model.beta[sm.params[*row * model.K + k]];
    return out;
  }
  return detail::mlp_forward(model, sm, values).activations.back();
}

inline Vector forward(const GamModel& model, std::span<const std::uint32_t> x) {
  Vector out(model.K, 0.0);
  for (std::size_t j = 0; j < model.sub_models.size(); ++j) {
    const Vector o = sub_forward(model, j, project(x, model.sub_models[j].features));
    for (std::size_t k = 0; k < model.K; ++k) out[k] += o[k];
  }
  return out;
}

// d f_j / d beta_{E_j}: K x |E_j|, columns in local slot order.
inline Matrix sub_jacobian(const GamModel& model, std::size_t j, std::span<const std::uint32_t> values) {
  if (j >= model.sub_models.size()) throw Error("sub_jacobian: invalid sub-model index");
  const auto& sm = model.sub_models[j];
  const std::size_t K = model.K;
  Matrix jac(K, sm.params.size());
  if (sm.kind == SubModelKind::kLinearCross) {
    if (auto row = detail::cross_row(model, sm, values))
      for (std::size_t k = 0; k < K; ++k) jac(k, *row * K + k) = 1.0;
    return jac;
  }

  const auto pass = detail::mlp_forward(model, sm, values);
  const auto w = sm.layer_widths(K);
  const std::size_t L = w.size() - 1;
  std::vector<std::size_t> layer_slot(L);
  for (std::size_t l = 0, s = 0; l < L; ++l) {
    layer_slot[l] = s;
    s += w[l + 1] * w[l] + w[l + 1];
  }
  auto param = [&](std::size_t s) { return model.beta[sm.params[s]]; };

  for (std::size_t k = 0; k < K; ++k) {
    Vector delta(K, 0.0);
    delta[k] = 1.0;
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t in = w[l], out = w[l + 1], base = layer_slot[l];
      for (std::size_t r = 0; r < out; ++r) {
        if (delta[r] == 0.0) continue;
        if (l == 0) {
          for (std::size_t h : pass.hot) jac(k, base + r * in + h) += delta[r];
        } else {
          const Vector& a = pass.activations[l - 1];
          for (std::size_t c = 0; c < in; ++c) jac(k, base + r * in + c) += delta[r] * a[c];
        }
        jac(k, base + out * in + r) += delta[r];
      }
      if (l == 0) break;
      const Vector& a = pass.activations[l - 1];
      Vector prev(in, 0.0);
      for (std::size_t c = 0; c < in; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < out; ++r) acc += param(base + r * in + c) * delta[r];
        prev[c] = acc * (1.0 - a[c] * a[c]);
      }
      delta = std::move(prev);
    }
  }
  return jac;
}

// Adds J_j(values)^T r into grad at the global indices E_j.
inline void accumulate_jacobian_transpose(const GamModel& model, std::size_t j, std::span<const std::uint32_t> values,
                                          std::span<const double> r, std::span<double> grad) {
  const auto& sm = model.sub_models[j];
  if (sm.kind == SubModelKind::kLinearCross) {
    if (auto row = detail::cross_row(model, sm, values))
      for (std::size_t k = 0; k < model.K; ++k) grad[sm.params[*row * model.K + k]] += r[k];
    return;
  }
  const Matrix jac = sub_jacobian(model, j, values);
  for (std::size_t s = 0; s < sm.params.size(); ++s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < model.K; ++k) acc += jac(k, s) * r[k];
    grad[sm.params[s]] += acc;
  }
}

// For every sub-model, the collection whose feature set contains E'_j. Among
// several candidates the smallest feature set wins, then the lowest index.
inline std::vector<std::size_t> validate_phi(const GamModel& model, const std::vector<BagCollection>& collections) {
  std::vector<std::size_t> phi;
  for (std::size_t j = 0; j < model.sub_models.size(); ++j) {
    const auto& feats = model.sub_models[j].features;
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < collections.size(); ++c) {
      if (!collections[c].feature_set.contains_all(feats)) continue;
      if (!best || collections[c].feature_set.size() < collections[*best].feature_set.size()) best = c;
    }
    if (!best) {
      std::string cols;
      for (std::size_t f : feats) cols += (cols.empty() ? "" : ",") + std::to_string(f);
      throw Error("no bag collection covers sub-model " + std::to_string(j) + " (features {" + cols + "})");
    }
    phi.push_back(*best);
  }
  return phi;
}

// Assembles a model from sub-model declarations. Each sub-model gets fresh
// parameters; share() then aliases one slot onto another sub-model's slot.
class GamBuilder {
 public:
  GamBuilder(const FeatureSchema& schema, const FeatureTable& observed, std::size_t K)
      : schema_(schema), observed_(observed), K_(K) {
    if (K == 0) throw Error("GamBuilder: K must be positive");
  }

  std::size_t add_linear_cross(std::vector<std::size_t> features) {
    SubModelSpec sm;
    sm.kind = SubModelKind::kLinearCross;
    sm.features = check_features(std::move(features));
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      auto key = project(observed_.row(i), sm.features);
      sm.combo_rows.try_emplace(std::move(key), sm.combo_rows.size());
    }
    if (sm.combo_rows.empty()) throw Error("GamBuilder: no observed rows for linear-cross sub-model");
    // Rows follow ascending combination order.
    std::size_t r = 0;
    for (auto& [key, row] : sm.combo_rows) row = r++;
    return push(std::move(sm));
  }

  std::size_t add_mlp(std::vector<std::size_t> features, std::vector<std::size_t> hidden) {
    SubModelSpec sm;
    sm.kind = SubModelKind::kMlp;
    sm.features = check_features(std::move(features));
    for (std::size_t f : sm.features) sm.input_vocab.push_back(schema_.columns[f].vocab_size());
    sm.hidden = std::move(hidden);
    for (std::size_t h : sm.hidden)
      if (h == 0) throw Error("GamBuilder: zero-width hidden layer");
    return push(std::move(sm));
  }

  // Sub-model `to` slot `to_slot` uses the parameter of `from` slot `from_slot`.
  void share(std::size_t from, std::size_t from_slot, std::size_t to, std::size_t to_slot) {
    if (from >= subs_.size() || to >= subs_.size()) throw Error("share: invalid sub-model index");
    if (from == to) throw Error("share: a sub-model cannot share with itself");
    if (from_slot >= subs_[from].params.size() || to_slot >= subs_[to].params.size())
      throw Error("share: invalid slot");
    const std::size_t g = subs_[from].params[from_slot];
    auto& dst = subs_[to].params;
    if (std::find(dst.begin(), dst.end(), g) != dst.end()) throw Error("share: slot already shared");
    dst[to_slot] = g;
  }

  // LinearCross parameters start at 0, Mlp parameters uniform in [-0.05, 0.05].
  GamModel build(std::uint64_t seed, UnseenPolicy unseen = UnseenPolicy::kError) const {
    GamModel model;
    model.K = K_;
    model.unseen = unseen;
    model.sub_models = subs_;
    std::map<std::size_t, std::size_t> renumber;
    std::vector<SubModelKind> owner;
    for (auto& sm : model.sub_models)
      for (auto& g : sm.params) {
        auto [it, inserted] = renumber.try_emplace(g, renumber.size());
        if (inserted) owner.push_back(sm.kind);
        g = it->second;
      }
    model.beta.assign(renumber.size(), 0.0);
    CounterRng rng(seed, 0x6a6d);
    for (std::size_t g = 0; g < model.beta.size(); ++g)
      if (owner[g] == SubModelKind::kMlp) model.beta[g] = rng.uniform(-0.05, 0.05);
    validate_model(model);
    return model;
  }

 private:
  std::vector<std::size_t> check_features(std::vector<std::size_t> features) const {
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
    if (features.empty()) throw Error("GamBuilder: sub-model needs at least one feature");
    for (std::size_t f : features)
      if (f >= schema_.d()) throw Error("GamBuilder: feature index out of range");
    return features;
  }

  std::size_t push(SubModelSpec sm) {
    const std::size_t n = sm.local_param_count(K_);
    for (std::size_t s = 0; s < n; ++s) sm.params.push_back(next_param_++);
    subs_.push_back(std::move(sm));
    return subs_.size() - 1;
  }

  const FeatureSchema& schema_;
  const FeatureTable& observed_;
  std::size_t K_;
  std::size_t next_param_ = 0;
  std::vector<SubModelSpec> subs_;
};

// FNV-1a, 64 bit, rendered as 16 hex digits.
inline std::string hex_digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

// Architecture config:
//   {"submodels": [{"features": ["F1"], "kind": "linear_cross"},
//                  {"features": ["F2", "F3"], "kind": "mlp", "hidden": [8]}],
//    "share": [{"from": [0, 0], "to": [1, 0]}]}
inline GamModel build_model_from_config(const nlohmann::json& config, const FeatureSchema& schema,
                                        const FeatureTable& observed, std::size_t K, std::uint64_t seed,
                                        UnseenPolicy unseen = UnseenPolicy::kError) {
  GamBuilder builder(schema, observed, K);
  if (!config.contains("submodels") || !config["submodels"].is_array() || config["submodels"].empty())
    throw Error("model config: 'submodels' must be a non-empty array");
  for (const auto& sm : config["submodels"]) {
    std::vector<std::size_t> cols;
    for (const auto& name : sm.at("features")) cols.push_back(schema.column_index(name.get<std::string>()));
    const std::string kind = sm.at("kind").get<std::string>();
    if (kind == "linear_cross") {
      builder.add_linear_cross(cols);
    } else if (kind == "mlp") {
      builder.add_mlp(cols, sm.value("hidden", std::vector<std::size_t>{8}));
    } else {
      throw Error("model config: unknown sub-model kind '" + kind + "'");
    }
  }
  if (config.contains("share"))
    for (const auto& s : config["share"]) {
      const auto from = s.at("from").get<std::vector<std::size_t>>();
      const auto to = s.at("to").get<std::vector<std::size_t>>();
      if (from.size() != 2 || to.size() != 2) throw Error("model config: share entries are [submodel, slot]");
      builder.share(from[0], from[1], to[0], to[1]);
    }
  return builder.build(seed, unseen);
}

inline std::string config_hash(const nlohmann::json& config) { return hex_digest(config.dump()); }

// Checkpoint layout (little-endian): "AGBK", u32 version = 1, 16-byte ASCII
// config hash, u64 p, then p IEEE-754 binary64 values.
inline void write_checkpoint(const std::string& path, std::span<const double> beta, const std::string& hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write '" + path + "'");
  const std::uint32_t version = 1;
  const std::uint64_t p = beta.size();
  if (hash.size() != 16) throw Error("checkpoint: hash must be 16 hex digits");
  out.write("AGBK", 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(hash.data(), 16);
  out.write(reinterpret_cast<const char*>(&p), sizeof p);
  out.write(reinterpret_cast<const char*>(beta.data()), static_cast<std::streamsize>(p * sizeof(double)));
}

inline Vector read_checkpoint(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  std::uint32_t version = 0;
  char hash[16];
  std::uint64_t p = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(hash, 16);
  in.read(reinterpret_cast<char*>(&p), sizeof p);
  if (!in || std::memcmp(magic, "AGBK", 4) != 0 || version != 1) throw Error("checkpoint: bad header");
  if (std::string(hash, 16) != expected_hash) throw Error("checkpoint: config hash mismatch");
  Vector beta(p);
  in.read(reinterpret_cast<char*>(beta.data()), static_cast<std::streamsize>(p * sizeof(double)));
  if (!in) throw Error("checkpoint: truncated");
  return beta;
}

}  // namespace aggbag

#endif  // AGGBAG_GAM_HPP_
