#pragma once

// Four-quadrant train/test strategy over correlation-ranked feature subsets.
// D_XY trains on split X and tests on split Y. Each split is partitioned once
// into train and test rows with the run seed; D_XY trains on X's train rows
// and evaluates on Y's test rows, so no quadrant ever sees its test rows while
// fitting.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfk/bonsai.hpp"
#include "pfk/dataset.hpp"
#include "pfk/detail/text.hpp"
#include "pfk/error.hpp"
#include "pfk/features.hpp"
#include "pfk/latency.hpp"
#include "pfk/log.hpp"
#include "pfk/metrics.hpp"
#include "pfk/parallel.hpp"
#include "pfk/preprocess.hpp"

namespace pfk {

enum class Quadrant { AA, BB, AB, BA };

inline constexpr std::array<Quadrant, 4> kQuadrants = {Quadrant::AA, Quadrant::BB, Quadrant::AB, Quadrant::BA};

inline std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::AA: return "D_AA";
    case Quadrant::BB: return "D_BB";
    case Quadrant::AB: return "D_AB";
    case Quadrant::BA: return "D_BA";
  }
  return "?";
}

inline std::optional<Quadrant> parse_quadrant(std::string_view s) {
  for (auto q : kQuadrants)
    if (to_string(q) == s) return q;
  return std::nullopt;
}

struct StrategyCell {
  Quadrant quadrant = Quadrant::AA;
  std::string model = "bonsai";
  std::string train_label;  // dataset the model was fitted on
  std::string test_label;   // dataset the metrics come from
  FeatureSubset subset;
  MetricsReport metrics;
  std::size_t model_size_bytes = 0;
  LatencyReport latency;
  std::vector<MetricsReport> batch_trend;
};

/// Metrics over consecutive batches of `test` (the last batch may be
/// smaller). `predict_fn` maps a feature vector to a prediction.
template <class PredictFn>
  requires std::invocable<PredictFn&, std::span<const double>>
std::vector<MetricsReport> batch_trend(PredictFn&& predict_fn, const FittedPreprocessor& fitted, const Dataset& test,
                                       std::size_t batch_size) {
  if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
  const auto data = transform_dataset(test, fitted);
  std::vector<MetricsReport> out;
  for (std::size_t start = 0; start < data.targets.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, data.targets.size());
    std::vector<double> y, yhat;
    for (std::size_t i = start; i < end; ++i) {
      y.push_back(data.targets[i]);
      yhat.push_back(predict_fn(data.features.row(i)));
    }
    out.push_back(evaluate_metrics(y, yhat));
  }
  return out;
}

inline std::vector<MetricsReport> batch_trend(const BonsaiModel& model, const FittedPreprocessor& fitted,
                                              const Dataset& test, std::size_t batch_size) {
  return batch_trend([&model](std::span<const double> x) { return predict(model, x); }, fitted, test, batch_size);
}

struct StrategyConfig {
  std::vector<std::size_t> subset_sizes = {2, 4, 5, 6, 8, 9};
  PreprocessConfig preprocess;
  BonsaiConfig bonsai;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int latency_warmup = 3;
  int latency_reps = 15;
  std::size_t trend_batch = 10;
};

/// A trained cell with everything needed to reproduce its row.
struct CellRun {
  StrategyCell cell;
  BonsaiModel model;
  FittedPreprocessor fitted;
  TrainReport train_report;
};

/// Fits the preprocessor and regressor on `train` (restricted to the subset)
/// and scores on `test`. Latency is only measured when `time_it` is set.
inline CellRun evaluate_cell(Quadrant q, const Dataset& train, const Dataset& test, const FeatureSubset& subset,
                             const StrategyConfig& config, bool time_it = true) {
  if (subset.empty()) throw ValidationError("subset", "feature subset '" + subset.name + "' is empty");
  if (test.empty()) throw ValidationError("records", "test split '" + test.label() + "' is empty");
  PreprocessConfig pc = config.preprocess;
  pc.features = subset.features;
  CellRun run;
  run.fitted = fit_pipeline(train, pc);
  const auto tr = transform_dataset(train, run.fitted);
  const auto te = transform_dataset(test, run.fitted);

  BonsaiConfig bc = config.bonsai;
  bc.input_dim = static_cast<int>(subset.size());
  bc.seed = config.seed;
  if (tr.targets.size() < static_cast<std::size_t>(bc.batch_size)) {
    warn("training split '" + train.label() + "' has fewer rows than the batch size; using one batch");
    bc.batch_size = static_cast<int>(tr.targets.size());
  }
  auto fitted_model = pfk::train(bc, tr.features, tr.targets);
  run.model = std::move(fitted_model.model);
  run.train_report = std::move(fitted_model.report);

  std::vector<double> yhat;
  yhat.reserve(te.targets.size());
  for (std::size_t i = 0; i < te.targets.size(); ++i) yhat.push_back(predict(run.model, te.features.row(i)));

  auto& c = run.cell;
  c.quadrant = q;
  c.train_label = train.label();
  c.test_label = test.label();
  c.subset = subset;
  c.metrics = evaluate_metrics(te.targets, yhat);
  c.model_size_bytes = model_size(run.model);
  c.batch_trend = batch_trend(run.model, run.fitted, test, config.trend_batch);
  if (time_it)
    c.latency = measure_latency(run.model, run.fitted, test.records(), config.latency_warmup, config.latency_reps);
  return run;
}

struct StrategyResult {
  std::vector<StrategyCell> cells;  // D_AA by size, D_BB by size, then D_AB and D_BA (intersection, union)
  std::optional<Partition> part_a;
  std::optional<Partition> part_b;
  std::optional<CorrelationRanking> ranking_a;
  std::optional<CorrelationRanking> ranking_b;
  std::optional<FeatureSubset> best_a;  // lowest-MAE D_AA subset
  std::optional<FeatureSubset> best_b;
};

/// |Pearson r| ranking of all features, fitted on `train` only.
inline CorrelationRanking rank_on(const Dataset& train, const PreprocessConfig& config) {
  PreprocessConfig all = config;
  all.features = all_feature_names();
  const auto fitted = fit_pipeline(train, all);
  const auto data = transform_dataset(train, fitted);
  return rank_features(data.features, data.targets);
}

namespace detail {

struct StrategyJob {
  Quadrant quadrant;
  const Dataset* train;
  const Dataset* test;
  FeatureSubset subset;
};

inline std::vector<CellRun> run_jobs(const std::vector<StrategyJob>& jobs, const StrategyConfig& config) {
  std::vector<CellRun> runs(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& j = jobs[i];
    runs[i] = evaluate_cell(j.quadrant, *j.train, *j.test, j.subset, config, false);
  });
  return runs;
}

inline std::optional<FeatureSubset> lowest_mae(const std::vector<CellRun>& runs) {
  const CellRun* best = nullptr;
  for (const auto& r : runs)
    if (!best || r.cell.metrics.mae < best->cell.metrics.mae) best = &r;
  if (!best) return std::nullopt;
  return best->cell.subset;
}

}  // namespace detail

/// Runs the whole grid. Cells are trained concurrently; latency is then
/// measured one cell at a time so timings do not compete for cores.
inline StrategyResult run_strategy(const SplitPair& split, const StrategyConfig& config) {
  if (config.subset_sizes.empty()) throw ValidationError("subsets", "no subsets");
  StrategyResult out;
  auto prepare = [&](const Dataset& d, std::optional<Partition>& part, std::optional<CorrelationRanking>& ranking) {
    if (d.size() < 2) {
      warn("split '" + d.label() + "' has fewer than 2 records; its quadrants are skipped");
      return;
    }
    part = train_test_partition(d, config.test_fraction, config.seed);
    ranking = rank_on(part->train, config.preprocess);
  };
  prepare(split.a, out.part_a, out.ranking_a);
  prepare(split.b, out.part_b, out.ranking_b);

  std::vector<detail::StrategyJob> first;
  std::vector<std::size_t> sizes = config.subset_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (out.part_a)
    for (auto n : sizes) first.push_back({Quadrant::AA, &out.part_a->train, &out.part_a->test, top_n(*out.ranking_a, n, "A")});
  if (out.part_b)
    for (auto n : sizes) first.push_back({Quadrant::BB, &out.part_b->train, &out.part_b->test, top_n(*out.ranking_b, n, "B")});
  auto runs = detail::run_jobs(first, config);

  std::vector<CellRun> runs_a, runs_b;
  for (auto& r : runs) (r.cell.quadrant == Quadrant::AA ? runs_a : runs_b).push_back(r);
  out.best_a = detail::lowest_mae(runs_a);
  out.best_b = detail::lowest_mae(runs_b);

  if (out.best_a && out.best_b) {
    std::vector<FeatureSubset> cross_ab, cross_ba;
    const auto inter_ab = subset_intersection(*out.best_a, *out.best_b);
    const auto inter_ba = subset_intersection(*out.best_b, *out.best_a);
    if (inter_ab.empty()) {
      warn("best subsets " + out.best_a->name + " and " + out.best_b->name + " share no feature; intersection rows skipped");
    } else {
      cross_ab.push_back(inter_ab);
      cross_ba.push_back(inter_ba);
    }
    cross_ab.push_back(subset_union(*out.best_a, *out.best_b));
    cross_ba.push_back(subset_union(*out.best_b, *out.best_a));
    std::vector<detail::StrategyJob> second;
    for (const auto& s : cross_ab) second.push_back({Quadrant::AB, &out.part_a->train, &out.part_b->test, s});
    for (const auto& s : cross_ba) second.push_back({Quadrant::BA, &out.part_b->train, &out.part_a->test, s});
    auto more = detail::run_jobs(second, config);
    for (auto& r : more) runs.push_back(std::move(r));
  } else {
    warn("cross quadrants D_AB and D_BA need both splits; skipped");
  }

  for (auto& r : runs) {
    const Dataset& test = r.cell.quadrant == Quadrant::AA || r.cell.quadrant == Quadrant::BA ? out.part_a->test
                                                                                           : out.part_b->test;
    r.cell.latency = measure_latency(r.model, r.fitted, test.records(), config.latency_warmup, config.latency_reps);
    out.cells.push_back(std::move(r.cell));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results grid CSV

inline constexpr std::string_view kGridHeader = "data,subset,mse,mae,r2,model_size_kb,model_ift_ms,pipeline_ift_ms";

struct GridRow {
  std::string data;
  std::string subset;
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double model_size_kb = 0.0;
  double model_ift_ms = 0.0;
  double pipeline_ift_ms = 0.0;

  bool operator==(const GridRow&) const = default;
};

inline GridRow grid_row(const StrategyCell& c) {
  return {std::string(to_string(c.quadrant)),
          c.subset.name,
          c.metrics.mse,
          c.metrics.mae,
          c.metrics.r2,
          static_cast<double>(c.model_size_bytes) / 1024.0,
          c.latency.model_only.median_ms,
          c.latency.pipeline.median_ms};
}

inline std::string grid_csv(const std::vector<GridRow>& rows) {
  using detail::format_double;
  std::string out(kGridHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += detail::quote_csv(r.data) + ',' + detail::quote_csv(r.subset) + ',' + format_double(r.mse) + ',' +
           format_double(r.mae) + ',' + format_double(r.r2) + ',' + format_double(r.model_size_kb) + ',' +
           format_double(r.model_ift_ms) + ',' + format_double(r.pipeline_ift_ms) + '\n';
  }
  return out;
}

inline std::string grid_csv(const std::vector<StrategyCell>& cells) {
  std::vector<GridRow> rows;
  for (const auto& c : cells) rows.push_back(grid_row(c));
  return grid_csv(rows);
}

/// Inverse of grid_csv. r2 may be "nan" (undefined on a constant test set).
inline std::vector<GridRow> parse_grid_csv(std::string_view text) {
  const auto rows = detail::split_csv(text);
  if (rows.empty()) throw ParseError("", "empty results grid");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kGridHeader) throw ParseError("", "unexpected results grid header '" + header + "'");
  std::vector<GridRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    const std::size_t row = r - 1;
    if (f.size() != 8) throw ParseError("", "expected 8 fields, got " + std::to_string(f.size()), row);
    auto num = [&](std::size_t i, const char* name, bool allow_nan = false) {
      if (allow_nan && detail::trim(f[i]) == "nan") return std::numeric_limits<double>::quiet_NaN();
      auto v = detail::parse_double(f[i]);
      if (!v) throw ParseError(name, "not a number: '" + f[i] + "'", row);
      return *v;
    };
    GridRow g;
    g.data = f[0];
    if (!parse_quadrant(g.data)) throw ValidationError("data", "unknown quadrant '" + g.data + "'", row);
    g.subset = f[1];
    g.mse = num(2, "mse");
    g.mae = num(3, "mae");
    g.r2 = num(4, "r2", true);
    g.model_size_kb = num(5, "model_size_kb");
    g.model_ift_ms = num(6, "model_ift_ms");
    g.pipeline_ift_ms = num(7, "pipeline_ift_ms");
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"r2", std::isnan(m.r2) ? nlohmann::json() : nlohmann::json(m.r2)},
          {"n", m.n}};
}

inline nlohmann::json to_json(const LatencyStats& s) {
  return {{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"mean_ms", s.mean_ms}, {"count", s.count}};
}

inline nlohmann::json to_json(const LatencyReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"mean_ms", s.mean_ms}, {"fraction", s.fraction}});
  return {{"model_only", to_json(r.model_only)}, {"pipeline", to_json(r.pipeline)}, {"stages", stages}};
}

inline nlohmann::json to_json(const StrategyCell& c) {
  nlohmann::json trend = nlohmann::json::array();
  for (const auto& m : c.batch_trend) trend.push_back(to_json(m));
  return {{"data", to_string(c.quadrant)},
          {"model", c.model},
          {"train_label", c.train_label},
          {"test_label", c.test_label},
          {"subset", c.subset.name},
          {"features", c.subset.features},
          {"metrics", to_json(c.metrics)},
          {"model_size_bytes", c.model_size_bytes},
          {"latency", to_json(c.latency)},
          {"batch_trend", trend}};
}

inline nlohmann::json to_json(const CorrelationRanking& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : r.entries) out.push_back({{"feature", e.name}, {"r", e.r}});
  return out;
}

inline nlohmann::json to_json(const StrategyResult& s) {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : s.cells) j["cells"].push_back(to_json(c));
  j["ranking"] = {{"A", s.ranking_a ? to_json(*s.ranking_a) : nlohmann::json()},
                  {"B", s.ranking_b ? to_json(*s.ranking_b) : nlohmann::json()}};
  j["best"] = {{"A", s.best_a ? nlohmann::json(s.best_a->name) : nlohmann::json()},
               {"B", s.best_b ? nlohmann::json(s.best_b->name) : nlohmann::json()}};
  return j;
}

}  // namespace pfk
