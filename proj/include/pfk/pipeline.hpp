#pragma once

// Single-model flow used by the train, sweep and benchmark commands:
// partition, rank features on the training rows, pick the subset, fit.

#include <string>
#include <vector>

#include "pfk/bonsai.hpp"
#include "pfk/config.hpp"
#include "pfk/dataset.hpp"
#include "pfk/features.hpp"
#include "pfk/feedback.hpp"
#include "pfk/metrics.hpp"
#include "pfk/preprocess.hpp"
#include "pfk/strategy.hpp"

namespace pfk {

struct PipelineSetup {
  Partition partition;
  CorrelationRanking ranking;
  PreprocessConfig preprocess;  // with the chosen feature list
};

/// Partitions `data` and chooses the feature list: the configured one when
/// given, otherwise the top `train_subset_size` features ranked on the
/// training rows.
inline PipelineSetup setup_pipeline(const Dataset& data, const RunConfig& c) {
  PipelineSetup s{train_test_partition(data, c.test_fraction, c.seed), {}, c.preprocess};
  s.ranking = rank_on(s.partition.train, c.preprocess);
  if (!c.features_given) s.preprocess.features = top_n(s.ranking, c.train_subset_size, "").features;
  return s;
}

struct PipelineRun {
  PipelineSetup setup;
  FittedPreprocessor fitted;
  BonsaiModel model;
  TrainReport report;
  MetricsReport test_metrics;
};

inline PipelineRun run_pipeline(const Dataset& data, const RunConfig& c) {
  PipelineRun run{setup_pipeline(data, c), {}, {}, {}, {}};
  run.fitted = fit_pipeline(run.setup.partition.train, run.setup.preprocess);
  const auto tr = transform_dataset(run.setup.partition.train, run.fitted);
  const auto te = transform_dataset(run.setup.partition.test, run.fitted);
  BonsaiConfig bc = c.bonsai;
  bc.input_dim = static_cast<int>(run.fitted.feature_order.size());
  bc.seed = c.seed;
  auto fitted = pfk::train(bc, tr.features, tr.targets);
  run.model = std::move(fitted.model);
  run.report = std::move(fitted.report);
  std::vector<double> yhat;
  for (std::size_t i = 0; i < te.targets.size(); ++i) yhat.push_back(predict(run.model, te.features.row(i)));
  run.test_metrics = evaluate_metrics(te.targets, yhat);
  return run;
}

inline SweepSpec sweep_spec(const RunConfig& c, const PreprocessConfig& preprocess) {
  SweepSpec s;
  s.grid = c.sweep_grid;
  s.objective = c.sweep_objective;
  s.budget = c.sweep_budget;
  s.seed = c.seed;
  s.base = c.bonsai;
  s.preprocess = preprocess;
  s.latency_warmup = 1;
  s.latency_reps = std::max(1, c.latency_reps / 3);
  return s;
}

/// `c` with a trial's parameters applied and the feature list pinned, so
/// that training from it reproduces the trial's model.
inline RunConfig adopt(RunConfig c, const ParamSet& params, const PreprocessConfig& preprocess) {
  c.preprocess.features = preprocess.features;
  c.features_given = true;
  for (const auto& [name, value] : params) apply_param(c.bonsai, c.preprocess, name, value);
  return c;
}

}  // namespace pfk
