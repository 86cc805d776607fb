#pragma once

// Run configuration: a single flat JSON object. Every key is optional except
// `seed`; unknown keys are rejected so typos do not silently fall back to
// defaults. See docs/config.md for the key list.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfk/bonsai.hpp"
#include "pfk/cart.hpp"
#include "pfk/error.hpp"
#include "pfk/feedback.hpp"
#include "pfk/preprocess.hpp"
#include "pfk/strategy.hpp"

namespace pfk {

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::string> input;
  std::optional<std::string> out;
  double test_fraction = 0.2;
  PreprocessConfig preprocess;
  bool features_given = false;  // otherwise the top `train_subset_size` ranked features are used
  std::size_t train_subset_size = 6;
  std::vector<std::size_t> subsets = {2, 4, 5, 6, 8, 9};
  BonsaiConfig bonsai;
  CartConfig cart;
  ParamGrid sweep_grid = {{"depth", {2, 3, 4}}, {"learning_rate", {0.02, 0.05, 0.1}}};
  Objective sweep_objective = Objective::mae;
  std::size_t sweep_budget = 64;
  int sweep_rounds = 1;
  int latency_warmup = 3;
  int latency_reps = 15;
  std::size_t trend_batch = 10;
  std::size_t synth_n = 500;
};

namespace detail {

inline const std::set<std::string, std::less<>>& config_keys() {
  static const std::set<std::string, std::less<>> keys = {
      "seed", "input", "out", "test_fraction", "m", "delta_h", "zscore_columns", "features", "train_subset_size",
      "subsets", "depth", "proj_dim", "sigma", "sparsity_z", "sparsity_nodes", "learning_rate", "epochs",
      "batch_size", "l2", "grad_clip", "cart_max_depth", "cart_min_samples_leaf", "sweep_grid", "sweep_objective",
      "sweep_budget", "sweep_rounds", "latency_warmup", "latency_reps", "trend_batch", "synth_n"};
  return keys;
}

inline double json_number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError(key, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(key, "must be finite");
  return v;
}

inline long long json_integer(const nlohmann::json& j, const std::string& key, long long lo, long long hi) {
  if (!j.is_number_integer()) throw ValidationError(key, "must be an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > hi)
    throw ValidationError(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline std::string json_string(const nlohmann::json& j, const std::string& key) {
  if (!j.is_string()) throw ValidationError(key, "must be a string");
  return j.get<std::string>();
}

inline std::vector<std::string> json_strings(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) throw ValidationError(key, "must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(json_string(e, key));
  return out;
}

}  // namespace detail

/// Parses a flat config object. `seed` is mandatory.
inline RunConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ValidationError("config", "must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!config_keys().contains(k)) throw ValidationError(k, "unknown config key");
  if (!j.contains("seed")) throw ValidationError("seed", "seed is mandatory");

  RunConfig c;
  constexpr long long kIntMax = 2147483647;
  if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
    throw ValidationError("seed", "must be a non-negative integer");
  if (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0)
    throw ValidationError("seed", "must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("input")) c.input = json_string(j.at("input"), "input");
  if (j.contains("out")) c.out = json_string(j.at("out"), "out");
  if (j.contains("test_fraction")) c.test_fraction = json_number(j.at("test_fraction"), "test_fraction");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    throw ValidationError("test_fraction", "must lie strictly between 0 and 1");
  if (j.contains("m")) c.preprocess.m = json_number(j.at("m"), "m");
  if (c.preprocess.m < 0.0) throw ValidationError("m", "must be non-negative");
  if (j.contains("delta_h")) c.preprocess.delta_h = json_number(j.at("delta_h"), "delta_h");
  if (j.contains("zscore_columns")) c.preprocess.zscore_columns = json_strings(j.at("zscore_columns"), "zscore_columns");
  if (j.contains("features")) {
    c.preprocess.features = json_strings(j.at("features"), "features");
    detail::check_feature_list(c.preprocess.features);
    c.features_given = true;
  }
  if (j.contains("train_subset_size"))
    c.train_subset_size = static_cast<std::size_t>(json_integer(j.at("train_subset_size"), "train_subset_size", 1, 9));
  if (j.contains("subsets")) {
    if (!j.at("subsets").is_array()) throw ValidationError("subsets", "must be an array of integers");
    c.subsets.clear();
    for (const auto& e : j.at("subsets")) c.subsets.push_back(static_cast<std::size_t>(json_integer(e, "subsets", 1, 9)));
  }

  auto& b = c.bonsai;
  if (j.contains("depth")) b.depth = static_cast<int>(json_integer(j.at("depth"), "depth", 0, kMaxTreeDepth));
  if (j.contains("proj_dim")) b.proj_dim = static_cast<int>(json_integer(j.at("proj_dim"), "proj_dim", 1, kMaxProjDim));
  if (j.contains("sigma")) b.sigma = json_number(j.at("sigma"), "sigma");
  if (j.contains("sparsity_z")) b.sparsity_z = json_number(j.at("sparsity_z"), "sparsity_z");
  if (j.contains("sparsity_nodes")) b.sparsity_nodes = json_number(j.at("sparsity_nodes"), "sparsity_nodes");
  if (j.contains("learning_rate")) b.learning_rate = json_number(j.at("learning_rate"), "learning_rate");
  if (j.contains("epochs")) b.epochs = static_cast<int>(json_integer(j.at("epochs"), "epochs", 1, kIntMax));
  if (j.contains("batch_size")) b.batch_size = static_cast<int>(json_integer(j.at("batch_size"), "batch_size", 1, kIntMax));
  if (j.contains("l2")) b.l2 = json_number(j.at("l2"), "l2");
  if (j.contains("grad_clip")) b.grad_clip = json_number(j.at("grad_clip"), "grad_clip");
  b.seed = c.seed;
  b.validate();

  if (j.contains("cart_max_depth"))
    c.cart.max_depth = static_cast<int>(json_integer(j.at("cart_max_depth"), "cart_max_depth", 0, 64));
  if (j.contains("cart_min_samples_leaf"))
    c.cart.min_samples_leaf =
        static_cast<int>(json_integer(j.at("cart_min_samples_leaf"), "cart_min_samples_leaf", 1, kIntMax));

  if (j.contains("sweep_grid")) {
    const auto& g = j.at("sweep_grid");
    if (!g.is_object()) throw ValidationError("sweep_grid", "must map parameter names to arrays of numbers");
    c.sweep_grid.clear();
    for (const auto& [name, values] : g.items()) {
      if (std::find(kSweepParams.begin(), kSweepParams.end(), name) == kSweepParams.end())
        throw ValidationError("sweep_grid", "unknown sweep parameter '" + name + "'");
      if (!values.is_array() || values.empty())
        throw ValidationError("sweep_grid", "parameter '" + name + "' needs a non-empty array");
      auto& dst = c.sweep_grid[name];
      for (const auto& v : values) dst.push_back(json_number(v, "sweep_grid"));
    }
    if (c.sweep_grid.empty()) throw ValidationError("sweep_grid", "empty grid");
  }
  if (j.contains("sweep_objective")) c.sweep_objective = parse_objective(json_string(j.at("sweep_objective"), "sweep_objective"));
  if (j.contains("sweep_budget"))
    c.sweep_budget = static_cast<std::size_t>(json_integer(j.at("sweep_budget"), "sweep_budget", 1, kIntMax));
  if (j.contains("sweep_rounds"))
    c.sweep_rounds = static_cast<int>(json_integer(j.at("sweep_rounds"), "sweep_rounds", 1, 100));
  if (j.contains("latency_warmup"))
    c.latency_warmup = static_cast<int>(json_integer(j.at("latency_warmup"), "latency_warmup", 0, kIntMax));
  if (j.contains("latency_reps"))
    c.latency_reps = static_cast<int>(json_integer(j.at("latency_reps"), "latency_reps", 1, kIntMax));
  if (j.contains("trend_batch"))
    c.trend_batch = static_cast<std::size_t>(json_integer(j.at("trend_batch"), "trend_batch", 1, kIntMax));
  if (j.contains("synth_n")) c.synth_n = static_cast<std::size_t>(json_integer(j.at("synth_n"), "synth_n", 1, kIntMax));
  return c;
}

/// Complete flat form of `c`; config_from_json(config_to_json(c)) == c.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  if (c.input) j["input"] = *c.input;
  if (c.out) j["out"] = *c.out;
  j["test_fraction"] = c.test_fraction;
  j["m"] = c.preprocess.m;
  j["delta_h"] = c.preprocess.delta_h;
  j["zscore_columns"] = c.preprocess.zscore_columns;
  if (c.features_given) j["features"] = c.preprocess.features;
  j["train_subset_size"] = c.train_subset_size;
  j["subsets"] = c.subsets;
  j["depth"] = c.bonsai.depth;
  j["proj_dim"] = c.bonsai.proj_dim;
  j["sigma"] = c.bonsai.sigma;
  j["sparsity_z"] = c.bonsai.sparsity_z;
  j["sparsity_nodes"] = c.bonsai.sparsity_nodes;
  j["learning_rate"] = c.bonsai.learning_rate;
  j["epochs"] = c.bonsai.epochs;
  j["batch_size"] = c.bonsai.batch_size;
  j["l2"] = c.bonsai.l2;
  j["grad_clip"] = c.bonsai.grad_clip;
  j["cart_max_depth"] = c.cart.max_depth;
  j["cart_min_samples_leaf"] = c.cart.min_samples_leaf;
  j["sweep_grid"] = nlohmann::json::object();
  for (const auto& [name, values] : c.sweep_grid) j["sweep_grid"][name] = values;
  j["sweep_objective"] = std::string(to_string(c.sweep_objective));
  j["sweep_budget"] = c.sweep_budget;
  j["sweep_rounds"] = c.sweep_rounds;
  j["latency_warmup"] = c.latency_warmup;
  j["latency_reps"] = c.latency_reps;
  j["trend_batch"] = c.trend_batch;
  j["synth_n"] = c.synth_n;
  return j;
}

inline StrategyConfig strategy_config(const RunConfig& c) {
  StrategyConfig s;
  s.subset_sizes = c.subsets;
  s.preprocess = c.preprocess;
  s.bonsai = c.bonsai;
  s.test_fraction = c.test_fraction;
  s.seed = c.seed;
  s.latency_warmup = c.latency_warmup;
  s.latency_reps = c.latency_reps;
  s.trend_batch = c.trend_batch;
  return s;
}

}  // namespace pfk
