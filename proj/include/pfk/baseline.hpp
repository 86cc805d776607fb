#pragma once

// CART baseline cells and bonsai-vs-CART comparison tables.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfk/cart.hpp"
#include "pfk/strategy.hpp"

namespace pfk {

/// CART counterpart of evaluate_cell: same preprocessing, subset and data.
inline StrategyCell evaluate_cart_cell(Quadrant q, const Dataset& train, const Dataset& test, const FeatureSubset& subset,
                                       const StrategyConfig& config, const CartConfig& cart, bool time_it = true) {
  if (subset.empty()) throw ValidationError("subset", "feature subset '" + subset.name + "' is empty");
  PreprocessConfig pc = config.preprocess;
  pc.features = subset.features;
  const auto fitted = fit_pipeline(train, pc);
  const auto tr = transform_dataset(train, fitted);
  const auto te = transform_dataset(test, fitted);
  const auto model = fit_cart(tr.features, tr.targets, cart, config.seed);
  auto predict_fn = [&model](std::span<const double> x) { return predict_cart(model, x); };

  std::vector<double> yhat;
  for (std::size_t i = 0; i < te.targets.size(); ++i) yhat.push_back(predict_fn(te.features.row(i)));
  StrategyCell c;
  c.quadrant = q;
  c.model = "cart";
  c.train_label = train.label();
  c.test_label = test.label();
  c.subset = subset;
  c.metrics = evaluate_metrics(te.targets, yhat);
  c.model_size_bytes = cart_size(model);
  c.batch_trend = batch_trend(predict_fn, fitted, test, config.trend_batch);
  if (time_it) c.latency = measure_latency(predict_fn, fitted, test.records(), config.latency_warmup, config.latency_reps);
  return c;
}

/// Ratios bonsai / CART for each compared quantity.
struct Comparison {
  Quadrant quadrant = Quadrant::AA;
  std::string subset;
  double r2_ratio = 1.0;
  double mse_ratio = 1.0;
  double mae_ratio = 1.0;
  double size_ratio = 1.0;
  double model_latency_ratio = 1.0;
  double pipeline_latency_ratio = 1.0;
  StrategyCell bonsai;
  StrategyCell cart;
};

namespace detail {

inline double ratio(double a, double b) {
  if (a == b) return 1.0;
  return a / b;
}

}  // namespace detail

/// Both cells must come from the same quadrant, data and feature subset.
inline Comparison compare(const StrategyCell& bonsai, const StrategyCell& cart) {
  if (bonsai.quadrant != cart.quadrant || bonsai.train_label != cart.train_label ||
      bonsai.test_label != cart.test_label || bonsai.subset.features != cart.subset.features ||
      bonsai.metrics.n != cart.metrics.n)
    throw ValidationError("provenance", "cells were not evaluated on the same data and subset");
  Comparison c;
  c.quadrant = bonsai.quadrant;
  c.subset = bonsai.subset.name;
  c.r2_ratio = detail::ratio(bonsai.metrics.r2, cart.metrics.r2);
  c.mse_ratio = detail::ratio(bonsai.metrics.mse, cart.metrics.mse);
  c.mae_ratio = detail::ratio(bonsai.metrics.mae, cart.metrics.mae);
  c.size_ratio = detail::ratio(static_cast<double>(bonsai.model_size_bytes), static_cast<double>(cart.model_size_bytes));
  c.model_latency_ratio = detail::ratio(bonsai.latency.model_only.median_ms, cart.latency.model_only.median_ms);
  c.pipeline_latency_ratio = detail::ratio(bonsai.latency.pipeline.median_ms, cart.latency.pipeline.median_ms);
  c.bonsai = bonsai;
  c.cart = cart;
  return c;
}

/// One CART cell per bonsai cell of a strategy run, compared pairwise.
inline std::vector<Comparison> compare_with_cart(const StrategyResult& result, const StrategyConfig& config,
                                                 const CartConfig& cart = {}) {
  std::vector<Comparison> out;
  for (const auto& cell : result.cells) {
    const bool train_a = cell.quadrant == Quadrant::AA || cell.quadrant == Quadrant::AB;
    const bool test_a = cell.quadrant == Quadrant::AA || cell.quadrant == Quadrant::BA;
    const auto& train = train_a ? result.part_a->train : result.part_b->train;
    const auto& test = test_a ? result.part_a->test : result.part_b->test;
    out.push_back(compare(cell, evaluate_cart_cell(cell.quadrant, train, test, cell.subset, config, cart)));
  }
  return out;
}

inline nlohmann::json to_json(const Comparison& c) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return {{"data", to_string(c.quadrant)},
          {"subset", c.subset},
          {"ratios",
           {{"r2", num(c.r2_ratio)},
            {"mse", num(c.mse_ratio)},
            {"mae", num(c.mae_ratio)},
            {"model_size", num(c.size_ratio)},
            {"model_ift", num(c.model_latency_ratio)},
            {"pipeline_ift", num(c.pipeline_latency_ratio)}}},
          {"cart",
           {{"metrics", to_json(c.cart.metrics)},
            {"model_size_bytes", c.cart.model_size_bytes},
            {"latency", to_json(c.cart.latency)}}}};
}

}  // namespace pfk
