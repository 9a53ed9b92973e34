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

// Command-line front end: ingestion, bagging, training, verification and
// experiment sweeps. Every command writes <command>.manifest.json into the
// output directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aggbag/bagging.hpp"
#include "aggbag/dataset.hpp"
#include "aggbag/experiment.hpp"
#include "aggbag/gam.hpp"
#include "aggbag/randombag.hpp"
#include "aggbag/semilinear_loss.hpp"
#include "aggbag/synthetic.hpp"
#include "aggbag/train.hpp"
#include "aggbag/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aggbag::cli {

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir = "out";
};

struct DataArgs {
  std::string csv;
  std::string labels;
  std::string delim = ",";
  bool real_labels = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

// "F1;F2,F3" -> {{F1}, {F2, F3}}.
std::vector<std::vector<std::string>> parse_feature_sets(const std::string& spec) {
  std::vector<std::vector<std::string>> out;
  for (const auto& group : split(spec, ';')) out.push_back(split(group, ','));
  if (out.empty()) throw Error("--features: no feature sets given");
  return out;
}

Dataset load(const DataArgs& a, const FeatureSchema* schema = nullptr) {
  if (a.delim.size() != 1) throw Error("--delim must be a single character");
  CsvOptions opts;
  opts.delimiter = a.delim[0];
  opts.real_labels = a.real_labels;
  const auto labels = split(a.labels, ',');
  if (labels.empty()) throw Error("--labels: no label columns given");
  return load_csv(a.csv, labels, opts, schema);
}

// Log loss needs one-hot labels; a single binary column becomes (1 - y, y).
Dataset prepare_labels(Dataset ds, const SemilinearLoss& sl) {
  if (sl.kind == LossKind::kLogLoss && ds.K() == 1 && ds.binary_labels) return to_one_hot(ds);
  return ds;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), globals_(g) {
    fs::create_directories(g.out_dir);
  }

  fs::path path(const std::string& name) const { return fs::path(globals_.out_dir) / name; }

  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }

  void write(const std::string& name, const std::string& content) {
    const auto p = path(name);
    write_atomic(p, content);
    add_output(p);
  }

  void finish(const json& config) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["command"] = command_;
    m["seed"] = globals_.seed;
    m["threads"] = globals_.threads;
    m["config"] = config;
    m["config_hash"] = config_hash(config);
    m["outputs"] = outputs_;
    m["wall_time"] = wall;
    std::string name = command_;
    std::replace(name.begin(), name.end(), ' ', '-');
    write_atomic(path(name + ".manifest.json"), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  Globals globals_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json data_config(const DataArgs& a) {
  return {{"csv", a.csv}, {"labels", a.labels}, {"delim", a.delim}, {"real_labels", a.real_labels}};
}

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("csv", a.csv, "Input CSV with a header row")->required()->check(CLI::ExistingFile);
  cmd->add_option("--labels", a.labels, "Comma-separated label column names")->required();
  cmd->add_option("--delim", a.delim, "Field delimiter")->capture_default_str();
  cmd->add_flag("--real-labels", a.real_labels, "Accept real-valued labels instead of 0/1");
}

// ---------------------------------------------------------------------------
// load

int cmd_load(const Globals& g, const DataArgs& a) {
  Run run("load", g);
  const Dataset ds = load(a);
  json schema;
  schema["N"] = ds.N();
  schema["label_names"] = ds.schema.label_names;
  schema["binary_labels"] = ds.binary_labels;
  for (const auto& c : ds.schema.columns) schema["columns"].push_back({{"name", c.name}, {"values", c.values}});
  run.write("schema.json", schema.dump(2) + "\n");
  std::cout << "loaded " << ds.N() << " examples, " << ds.d() << " feature columns, " << ds.K() << " label column(s)\n";
  for (const auto& c : ds.schema.columns) std::cout << "  " << c.name << ": " << c.vocab_size() << " values\n";
  run.finish(data_config(a));
  return 0;
}

// ---------------------------------------------------------------------------
// bag

struct BagArgs {
  std::string features;
  std::size_t min_bag_size = 1;
  std::optional<double> epsilon;
  double label_range = 1.0;
  std::string loss = "mse";
};

std::string collection_file_name(const FeatureSchema& schema, const FeatureSet& fs) {
  std::string name = "bags";
  for (std::size_t c : fs.columns()) name += "_" + schema.columns[c].name;
  return name + ".jsonl";
}

std::vector<FeatureSet> resolve_feature_sets(const FeatureSchema& schema, const std::string& spec) {
  std::vector<FeatureSet> out;
  for (const auto& names : parse_feature_sets(spec)) out.push_back(feature_set_by_names(schema, names));
  return out;
}

std::vector<BagCollection> build_collections(const Dataset& ds, const std::vector<FeatureSet>& sets,
                                             const SemilinearLoss& sl, std::size_t min_bag_size,
                                             std::optional<double> epsilon, double label_range, std::uint64_t seed) {
  auto cols = multi_curated_bags(ds, sets, sl.transform, min_bag_size);
  if (epsilon)
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = add_dp_noise(cols[c], *epsilon, label_range, mix64(seed) + c);
  return cols;
}

int cmd_bag(const Globals& g, const DataArgs& a, const BagArgs& b) {
  Run run("bag", g);
  const SemilinearLoss sl = loss_by_name(b.loss);
  const Dataset ds = prepare_labels(load(a), sl);
  const auto sets = resolve_feature_sets(ds.schema, b.features);
  const auto cols = build_collections(ds, sets, sl, b.min_bag_size, b.epsilon, b.label_range, g.seed);
  for (const auto& col : cols) {
    std::ostringstream out;
    write_collection_jsonl(out, col, ds.schema);
    const std::string name = collection_file_name(ds.schema, col.feature_set);
    run.write(name, out.str());
    std::cout << name << ": " << col.bags.size() << " bags, " << col.retained() << " examples retained, "
              << col.filtered_count << " filtered" << (col.epsilon ? ", noised" : "") << "\n";
  }
  json config = data_config(a);
  config.update({{"features", b.features}, {"min_bag_size", b.min_bag_size}, {"epsilon", nullable(b.epsilon)},
                 {"label_range", b.label_range}, {"loss", b.loss}});
  run.finish(config);
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string mode = "aggregate";
  std::string loss = "mse";
  double lr = 0.1;
  std::size_t steps = 100;
  std::optional<std::size_t> batch_bags;
  std::string model;
  std::string features;
  std::size_t min_bag_size = 1;
  std::optional<double> epsilon;
  double label_range = 1.0;
  std::string test;
};

json default_model_config(const FeatureSchema& schema, const std::string& features) {
  json subs = json::array();
  if (!features.empty()) {
    for (const auto& set : parse_feature_sets(features)) subs.push_back({{"features", set}, {"kind", "linear_cross"}});
  } else {
    for (const auto& c : schema.columns) subs.push_back({{"features", {c.name}}, {"kind", "linear_cross"}});
  }
  return {{"submodels", subs}};
}

json load_model_config(const std::string& path, const FeatureSchema& schema, const std::string& features) {
  if (path.empty()) return default_model_config(schema, features);
  std::ifstream in(path);
  if (!in) throw Error("cannot open model config '" + path + "'");
  return json::parse(in);
}

// Feature sets of the collections used in aggregate mode: --features when
// given, otherwise the distinct sub-model feature sets.
std::vector<FeatureSet> aggregate_feature_sets(const GamModel& model, const FeatureSchema& schema,
                                               const std::string& features) {
  if (!features.empty()) return resolve_feature_sets(schema, features);
  std::vector<FeatureSet> out;
  for (const auto& sm : model.sub_models) {
    FeatureSet fs(sm.features);
    if (std::find(out.begin(), out.end(), fs) == out.end()) out.push_back(fs);
  }
  return out;
}

int cmd_train(const Globals& g, const DataArgs& a, const TrainArgs& t) {
  Run run("train", g);
  if (t.mode != "individual" && t.mode != "aggregate") throw Error("--mode must be individual or aggregate");
  const SemilinearLoss sl = loss_by_name(t.loss);
  const Dataset ds = prepare_labels(load(a), sl);
  std::optional<Dataset> test;
  if (!t.test.empty()) {
    DataArgs ta = a;
    ta.csv = t.test;
    test = prepare_labels(load(ta, &ds.schema), sl);
  }
  const json model_config = load_model_config(t.model, ds.schema, t.features);
  const GamModel model = build_model_from_config(model_config, ds.schema, ds.features, ds.K(), g.seed, UnseenPolicy::kZero);

  TrainConfig cfg;
  cfg.learning_rate = t.lr;
  cfg.steps = t.steps;
  cfg.seed = g.seed;
  cfg.batch_bags = t.batch_bags;

  std::vector<BagCollection> cols;
  DataSource source = IndividualSource{&ds};
  if (t.mode == "aggregate") {
    cols = build_collections(ds, aggregate_feature_sets(model, ds.schema, t.features), sl, t.min_bag_size, t.epsilon,
                             t.label_range, g.seed);
    source = AggregateSource{&ds.features, &cols, validate_phi(model, cols)};
  }
  const Dataset& eval = test ? *test : ds;
  const auto result = train_loop(model, source, sl, cfg, &eval);

  std::ostringstream trace;
  for (const auto& r : result.trace)
    trace << json{{"step", r.step}, {"mean_loss", r.mean_loss}, {"hamming_risk", nullable(r.hamming_risk)}}.dump()
          << "\n";
  run.write("trace.jsonl", trace.str());
  const std::string hash = config_hash(model_config);
  run.write("model.json", model_config.dump(2) + "\n");
  const auto ckpt = run.path("model.ckpt");
  write_checkpoint(ckpt.string(), result.model.beta, hash);
  run.add_output(ckpt);

  const Metrics final_metrics = eval_metrics(result.model, eval, sl);
  std::cout << "mode=" << t.mode << " loss=" << t.loss << " steps=" << t.steps << " p=" << model.p()
            << " mean_loss=" << final_metrics.mean_loss;
  if (final_metrics.hamming_risk) std::cout << " hamming_risk=" << *final_metrics.hamming_risk;
  std::cout << "\n";

  json config = data_config(a);
  config.update({{"mode", t.mode}, {"loss", t.loss}, {"lr", t.lr}, {"steps", t.steps},
                 {"batch_bags", t.batch_bags ? json(*t.batch_bags) : json(nullptr)}, {"model", model_config},
                 {"features", t.features}, {"min_bag_size", t.min_bag_size}, {"epsilon", nullable(t.epsilon)},
                 {"label_range", t.label_range}, {"test", t.test}});
  run.finish(config);
  return 0;
}

// ---------------------------------------------------------------------------
// verify-lossless

struct VerifyArgs {
  std::string loss;
  std::string submodel;
  std::string sharing = "both";
  std::size_t seeds = 20;
  bool sabotage = false;
};

constexpr double kLosslessTolerance = 1e-8;

int cmd_verify_lossless(const Globals& g, const VerifyArgs& v) {
  Run run("verify-lossless", g);
  std::vector<LossKind> losses{LossKind::kMse, LossKind::kLogLoss, LossKind::kPoisson};
  if (!v.loss.empty()) losses = {loss_by_name(v.loss).kind};
  std::vector<SubModelKind> kinds{SubModelKind::kLinearCross, SubModelKind::kMlp};
  if (v.submodel == "mlp") kinds = {SubModelKind::kMlp};
  else if (v.submodel == "linear_cross") kinds = {SubModelKind::kLinearCross};
  else if (!v.submodel.empty()) throw Error("--submodel must be linear_cross or mlp");
  std::vector<bool> sharing{false, true};
  if (v.sharing == "on") sharing = {true};
  else if (v.sharing == "off") sharing = {false};
  else if (v.sharing != "both") throw Error("--sharing must be on, off or both");

  const auto rep = run_lossless_matrix(losses, kinds, sharing, v.seeds, g.seed, v.sabotage);
  std::ostringstream out;
  for (const auto& r : rep.results)
    out << json{{"config", describe(r.config)}, {"deviation", r.deviation},
                {"pass", r.deviation <= kLosslessTolerance}}.dump()
        << "\n";
  run.write("lossless.jsonl", out.str());
  const bool pass = rep.max_deviation <= kLosslessTolerance;
  std::cout << "cases=" << rep.results.size() << " max_relative_deviation=" << rep.max_deviation
            << " tolerance=" << kLosslessTolerance << " " << (pass ? "PASS" : "FAIL") << "\n";
  if (!pass && rep.worst) std::cout << "worst configuration: " << describe(*rep.worst) << "\n";
  run.finish({{"loss", v.loss}, {"submodel", v.submodel}, {"sharing", v.sharing}, {"seeds", v.seeds},
              {"sabotage", v.sabotage}});
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// randombag

struct RandomBagArgs {
  std::size_t m = 1;
  std::optional<std::size_t> n;
  std::size_t steps = 100;
  double lr = 20.0;
  std::string model;
  std::string test;
  double delta = 0.05;
  std::string complexities;
  std::size_t max_n = 8;
  std::size_t sets = 20;
  std::size_t hypotheses = 5;
  std::size_t trials = 100000;
};

int cmd_randombag_fit(const Globals& g, const DataArgs& a, const RandomBagArgs& r) {
  Run run("randombag fit", g);
  const Dataset ds = load(a);
  if (!ds.binary_labels) throw Error("randombag fit: labels must be binary");
  std::optional<Dataset> test;
  if (!r.test.empty()) {
    DataArgs ta = a;
    ta.csv = r.test;
    test = load(ta, &ds.schema);
  }
  const json model_config = load_model_config(r.model, ds.schema, "");
  const GamModel model = build_model_from_config(model_config, ds.schema, ds.features, ds.K(), g.seed, UnseenPolicy::kZero);
  const std::size_t n = r.n.value_or(ds.N());
  const auto batch = make_random_bag_batch(ds, r.m, n, g.seed);
  TrainConfig cfg;
  cfg.learning_rate = r.lr;
  cfg.steps = r.steps;
  cfg.seed = g.seed;
  const Dataset& eval = test ? *test : ds;
  const auto fit = fit_random_bags(model, batch, ds.features, cfg, &eval);

  std::ostringstream trace;
  for (const auto& rec : fit.trace)
    trace << json{{"step", rec.step}, {"objective", rec.objective}, {"log_loss", nullable(rec.eval_log_loss)},
                  {"hamming_risk", nullable(rec.eval_hamming_risk)}}.dump()
          << "\n";
  run.write("randombag_trace.jsonl", trace.str());
  run.write("randombag_model.json", model_config.dump(2) + "\n");
  const auto ckpt = run.path("randombag_model.ckpt");
  write_checkpoint(ckpt.string(), fit.model.beta, config_hash(model_config));
  run.add_output(ckpt);
  const auto final_obj = corrected_objective(fit.model, batch, ds.features);
  std::cout << "m=" << r.m << " n=" << n << " N=" << ds.N() << " correction_factor=" << final_obj.correction_factor
            << " objective=" << final_obj.objective << " log_loss=" << sigmoid_log_loss(fit.model, eval)
            << " hamming_risk=" << sigmoid_hamming_risk(fit.model, eval) << "\n";
  json config = data_config(a);
  config.update({{"m", r.m}, {"n", n}, {"steps", r.steps}, {"lr", r.lr}, {"model", model_config}, {"test", r.test}});
  run.finish(config);
  return 0;
}

int cmd_randombag_bound(const Globals& g, const RandomBagArgs& r) {
  Run run("randombag bound", g);
  std::ifstream in(r.complexities);
  if (!in) throw Error("cannot open complexities file '" + r.complexities + "'");
  const json c = json::parse(in);
  BoundInputs inp;
  inp.delta = r.delta;
  inp.m = c.at("m").get<std::size_t>();
  inp.N = c.at("N").get<std::size_t>();
  inp.n = c.at("n").get<std::size_t>();
  inp.K = c.value("K", std::size_t{1});
  inp.rademacher_per_class = c.at("rademacher_per_class").get<std::vector<double>>();
  inp.flat_rademacher_emp = c.at("flat_rademacher_emp").get<double>();
  inp.flat_rademacher_pop = c.at("flat_rademacher_pop").get<double>();
  const double value = excess_risk_bound(inp);
  json out = c;
  out["delta"] = r.delta;
  out["confidence"] = 1.0 - 4.0 * r.delta;
  out["bound"] = value;
  out["flat_rademacher_pop_is_plug_in"] = true;
  run.write("bound.json", out.dump(2) + "\n");
  std::cout << "excess risk bound=" << value << " (holds with probability " << 1.0 - 4.0 * r.delta
            << "; population complexity is a plug-in estimate)\n";
  json config = c;
  config["delta"] = r.delta;
  run.finish(config);
  return 0;
}

int cmd_randombag_verify_lemmas(const Globals& g, const RandomBagArgs& r) {
  Run run("randombag verify-lemmas", g);
  if (r.max_n < 2) throw Error("--max-n must be at least 2");
  std::ostringstream out;
  CounterRng rng(g.seed, 0x1e44a);
  double worst_wor = 0.0;
  std::size_t wor_cases = 0;
  for (std::size_t s = 0; s < r.sets; ++s)
    for (std::size_t N = 2; N <= r.max_n; ++N) {
      Matrix v(N, 1 + rng.below(3));
      for (double& x : v.data()) x = rng.uniform(-2.0, 2.0);
      for (std::size_t m = 1; m <= N; ++m) {
        const double closed = wor_mean_sqnorm(v, m), brute = wor_mean_sqnorm_bruteforce(v, m);
        worst_wor = std::max(worst_wor, std::abs(closed - brute));
        ++wor_cases;
        out << json{{"lemma", "wor_mean_sqnorm"}, {"set", s}, {"N", N}, {"m", m}, {"closed_form", closed},
                    {"bruteforce", brute}}.dump()
            << "\n";
      }
    }
  const bool wor_pass = worst_wor <= 1e-10;

  std::size_t r1_pass = 0;
  for (std::size_t h = 0; h < r.hypotheses; ++h) {
    const std::size_t N = 4 + rng.below(7);
    const std::size_t K = 1 + rng.below(2);
    const std::size_t m = 2 + rng.below(N - 2);
    Matrix preds(N, K), labels(N, K);
    for (double& x : preds.data()) x = static_cast<double>(rng.below(2));
    for (double& x : labels.data()) x = static_cast<double>(rng.below(2));
    const auto c = r1_closed_form_check(preds, labels, m, r.trials, mix64(g.seed) + h, g.threads);
    const bool ok = c.abs_diff <= 5.0 * c.std_error;
    r1_pass += ok ? 1 : 0;
    out << json{{"lemma", "r1"}, {"hypothesis", h}, {"N", N}, {"K", K}, {"m", m}, {"mc_estimate", c.mc_estimate},
                {"std_error", c.std_error}, {"closed_form", c.closed_form},
                {"closed_form_literal", c.closed_form_literal}, {"abs_diff", c.abs_diff}, {"pass", ok}}.dump()
        << "\n";
  }
  run.write("lemmas.jsonl", out.str());
  const bool pass = wor_pass && r1_pass == r.hypotheses;
  std::cout << "wor_mean_sqnorm: " << wor_cases << " cases, max |closed - bruteforce| = " << worst_wor
            << (wor_pass ? " PASS" : " FAIL") << "\n"
            << "r1: " << r1_pass << "/" << r.hypotheses << " within 5 standard errors"
            << (r1_pass == r.hypotheses ? " PASS" : " FAIL") << "\n";
  run.finish({{"max_n", r.max_n}, {"sets", r.sets}, {"hypotheses", r.hypotheses}, {"trials", r.trials}});
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string name;
  std::size_t seeds = 10;
  std::size_t n_train = 5000;
  std::size_t n_test = 5000;
};

std::string format_param(double p) {
  if (std::isinf(p)) return "inf";
  std::ostringstream s;
  s << p;
  return s.str();
}

int cmd_experiment(const Globals& g, const ExperimentArgs& e) {
  Run run("experiment", g);
  ExperimentConfig cfg;
  cfg.seeds = e.seeds;
  cfg.base_seed = g.seed;
  cfg.threads = g.threads;
  cfg.data.n_train = e.n_train;
  cfg.data.n_test = e.n_test;
  const auto result = run_experiment(e.name, cfg);

  std::ostringstream jsonl, csv;
  csv << "kind,series,param,seed,step,test_log_loss\n";
  auto emit = [&](const char* kind, const ExperimentRow& r) {
    jsonl << json{{"kind", kind}, {"series", r.series}, {"param", format_param(r.param)}, {"seed", r.seed},
                  {"step", r.step}, {"test_log_loss", r.test_log_loss}}.dump()
          << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", r.test_log_loss);
    csv << kind << "," << r.series << "," << format_param(r.param) << "," << r.seed << "," << r.step << "," << buf
        << "\n";
  };
  for (const auto& r : result.finals) emit("final", r);
  for (const auto& r : result.curves) emit("curve", r);
  run.write(e.name + ".jsonl", jsonl.str());
  run.write(e.name + ".csv", csv.str());

  std::set<std::string> series;
  for (const auto& r : result.finals) series.insert(r.series);
  for (const auto& s : series)
    for (const auto& [param, mean] : mean_by_param(result, s))
      std::cout << s << " param=" << format_param(param) << " mean_test_log_loss=" << mean << "\n";
  run.finish({{"name", e.name}, {"seeds", e.seeds}, {"n_train", e.n_train}, {"n_test", e.n_test}});
  return 0;
}

int main(int argc, char** argv) {
  CLI::App app{"Training generalized additive models from aggregated labels"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Run seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for Monte-Carlo and sweeps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and manifests")->capture_default_str();

  DataArgs data;

  auto* load_cmd = app.add_subcommand("load", "Parse a CSV and write its encoded schema");
  add_data_options(load_cmd, data);

  BagArgs bag;
  auto* bag_cmd = app.add_subcommand("bag", "Build curated bag collections");
  add_data_options(bag_cmd, data);
  bag_cmd->add_option("--features", bag.features, "Feature sets, e.g. \"F1;F2,F3\"")->required();
  bag_cmd->add_option("--min-bag-size", bag.min_bag_size)->capture_default_str()->check(CLI::PositiveNumber);
  bag_cmd->add_option("--epsilon", bag.epsilon, "Laplace label noise per collection")->check(CLI::PositiveNumber);
  bag_cmd->add_option("--label-range", bag.label_range, "Label sensitivity for noise")->capture_default_str();
  bag_cmd->add_option("--loss", bag.loss, "Loss whose label transform is aggregated")
      ->capture_default_str()
      ->check(CLI::IsMember({"mse", "logloss", "poisson"}));

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Gradient descent from individual or aggregate labels");
  add_data_options(train_cmd, data);
  train_cmd->add_option("--mode", tr.mode)->capture_default_str()->check(CLI::IsMember({"individual", "aggregate"}));
  train_cmd->add_option("--loss", tr.loss)->capture_default_str()->check(CLI::IsMember({"mse", "logloss", "poisson"}));
  train_cmd->add_option("--lr", tr.lr)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--steps", tr.steps)->capture_default_str();
  train_cmd->add_option("--batch-bags", tr.batch_bags, "Bags per collection per step");
  train_cmd->add_option("--model", tr.model, "Model architecture JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--features", tr.features, "Bag feature sets, e.g. \"F1;F2,F3\"");
  train_cmd->add_option("--min-bag-size", tr.min_bag_size)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--epsilon", tr.epsilon)->check(CLI::PositiveNumber);
  train_cmd->add_option("--label-range", tr.label_range)->capture_default_str();
  train_cmd->add_option("--test", tr.test, "Evaluation CSV")->check(CLI::ExistingFile);

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify-lossless", "Compare aggregate and individual gradients");
  verify_cmd->add_option("--loss", ver.loss)->check(CLI::IsMember({"mse", "logloss", "poisson"}));
  verify_cmd->add_option("--submodel", ver.submodel)->check(CLI::IsMember({"linear_cross", "mlp"}));
  verify_cmd->add_option("--sharing", ver.sharing)->capture_default_str()->check(CLI::IsMember({"on", "off", "both"}));
  verify_cmd->add_option("--seeds", ver.seeds)->capture_default_str()->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--sabotage", ver.sabotage, "Route one sub-model to a non-covering collection");

  RandomBagArgs rb;
  auto* rb_cmd = app.add_subcommand("randombag", "Random-bag estimator tools");
  rb_cmd->require_subcommand(1);
  auto* rb_fit = rb_cmd->add_subcommand("fit", "Fit the corrected random-bag objective");
  add_data_options(rb_fit, data);
  rb_fit->add_option("--m", rb.m, "Bag size")->required()->check(CLI::PositiveNumber);
  rb_fit->add_option("--n", rb.n, "Number of bags (default N)")->check(CLI::PositiveNumber);
  rb_fit->add_option("--steps", rb.steps)->capture_default_str();
  rb_fit->add_option("--lr", rb.lr)->capture_default_str()->check(CLI::PositiveNumber);
  rb_fit->add_option("--model", rb.model, "Model architecture JSON")->check(CLI::ExistingFile);
  rb_fit->add_option("--test", rb.test, "Evaluation CSV")->check(CLI::ExistingFile);
  auto* rb_bound = rb_cmd->add_subcommand("bound", "Evaluate the excess-risk bound");
  rb_bound->add_option("--delta", rb.delta)->capture_default_str();
  rb_bound->add_option("--complexities", rb.complexities, "JSON with m, N, n, K and complexities")
      ->required()
      ->check(CLI::ExistingFile);
  auto* rb_lemmas = rb_cmd->add_subcommand("verify-lemmas", "Closed forms against enumeration and Monte-Carlo");
  rb_lemmas->add_option("--max-n", rb.max_n)->capture_default_str();
  rb_lemmas->add_option("--sets", rb.sets)->capture_default_str()->check(CLI::PositiveNumber);
  rb_lemmas->add_option("--hypotheses", rb.hypotheses)->capture_default_str()->check(CLI::PositiveNumber);
  rb_lemmas->add_option("--trials", rb.trials)->capture_default_str()->check(CLI::PositiveNumber);

  ExperimentArgs ex;
  auto* exp_cmd = app.add_subcommand("experiment", "Synthetic sweeps");
  exp_cmd->add_option("name", ex.name)
      ->required()
      ->check(CLI::IsMember({"noise_free", "dp_sweep", "random_bag_sweep", "curated_vs_random"}));
  exp_cmd->add_option("--seeds", ex.seeds)->capture_default_str()->check(CLI::PositiveNumber);
  exp_cmd->add_option("--n-train", ex.n_train)->capture_default_str()->check(CLI::PositiveNumber);
  exp_cmd->add_option("--n-test", ex.n_test)->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*load_cmd) return cmd_load(g, data);
    if (*bag_cmd) return cmd_bag(g, data, bag);
    if (*train_cmd) return cmd_train(g, data, tr);
    if (*verify_cmd) return cmd_verify_lossless(g, ver);
    if (*rb_fit) return cmd_randombag_fit(g, data, rb);
    if (*rb_bound) return cmd_randombag_bound(g, rb);
    if (*rb_lemmas) return cmd_randombag_verify_lemmas(g, rb);
    if (*exp_cmd) return cmd_experiment(g, ex);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace aggbag::cli

int main(int argc, char** argv) { return aggbag::cli::main(argc, argv); }
