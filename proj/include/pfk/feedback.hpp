#pragma once

// Offline optimization loop: a performance analyzer over strategy cells and
// a deterministic grid search over hyperparameters with incumbent retention
// and grid narrowing between rounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfk/bonsai.hpp"
#include "pfk/dataset.hpp"
#include "pfk/detail/text.hpp"
#include "pfk/error.hpp"
#include "pfk/latency.hpp"
#include "pfk/metrics.hpp"
#include "pfk/parallel.hpp"
#include "pfk/preprocess.hpp"
#include "pfk/strategy.hpp"

namespace pfk {

// ---------------------------------------------------------------------------
// Performance analyzer

struct QuadrantBest {
  Quadrant quadrant = Quadrant::AA;
  std::size_t by_mae = 0;  // indices into the analyzed cells
  std::size_t by_mse = 0;
  std::size_t by_r2 = 0;
};

struct RegressionFlag {
  Quadrant quadrant = Quadrant::AA;
  std::string subset;
  std::string metric;
  double before = 0.0;
  double after = 0.0;
};

struct AnalysisSummary {
  std::vector<QuadrantBest> best;  // quadrants in D_AA, D_BB, D_AB, D_BA order, absent ones omitted
  std::vector<RegressionFlag> regressions;
};

/// Best cell per quadrant for each metric (first cell wins ties; an
/// undefined r2 never wins over a defined one). With `previous`, cells that
/// match on (quadrant, model, subset) are flagged when any metric got worse.
inline AnalysisSummary analyze(std::span<const StrategyCell> cells,
                               std::optional<std::span<const StrategyCell>> previous = std::nullopt) {
  if (cells.empty()) throw ValidationError("cells", "nothing to analyze");
  AnalysisSummary out;
  for (auto q : kQuadrants) {
    std::optional<QuadrantBest> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      if (c.quadrant != q) continue;
      if (!best) {
        best = QuadrantBest{q, i, i, i};
        continue;
      }
      if (c.metrics.mae < cells[best->by_mae].metrics.mae) best->by_mae = i;
      if (c.metrics.mse < cells[best->by_mse].metrics.mse) best->by_mse = i;
      const double r2_best = cells[best->by_r2].metrics.r2;
      if (!std::isnan(c.metrics.r2) && (std::isnan(r2_best) || c.metrics.r2 > r2_best)) best->by_r2 = i;
    }
    if (best) out.best.push_back(*best);
  }
  if (previous) {
    for (const auto& c : cells) {
      for (const auto& p : *previous) {
        if (p.quadrant != c.quadrant || p.model != c.model || p.subset.name != c.subset.name) continue;
        auto flag = [&](const char* metric, double before, double after, bool worse) {
          if (worse) out.regressions.push_back({c.quadrant, c.subset.name, metric, before, after});
        };
        flag("mae", p.metrics.mae, c.metrics.mae, c.metrics.mae > p.metrics.mae);
        flag("mse", p.metrics.mse, c.metrics.mse, c.metrics.mse > p.metrics.mse);
        flag("r2", p.metrics.r2, c.metrics.r2, c.metrics.r2 < p.metrics.r2);
        break;
      }
    }
  }
  return out;
}

inline nlohmann::json to_json(const AnalysisSummary& s, std::span<const StrategyCell> cells) {
  nlohmann::json j;
  j["best"] = nlohmann::json::array();
  for (const auto& b : s.best) {
    j["best"].push_back({{"data", to_string(b.quadrant)},
                         {"mae", cells[b.by_mae].subset.name},
                         {"mse", cells[b.by_mse].subset.name},
                         {"r2", cells[b.by_r2].subset.name}});
  }
  j["regressions"] = nlohmann::json::array();
  for (const auto& r : s.regressions) {
    j["regressions"].push_back(
        {{"data", to_string(r.quadrant)}, {"subset", r.subset}, {"metric", r.metric}, {"before", r.before}, {"after", r.after}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Sensitivity sweep

enum class Objective { mae, mse, r2 };

inline std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::mae: return "mae";
    case Objective::mse: return "mse";
    case Objective::r2: return "r2";
  }
  return "?";
}

inline Objective parse_objective(std::string_view s) {
  if (s == "mae") return Objective::mae;
  if (s == "mse") return Objective::mse;
  if (s == "r2") return Objective::r2;
  throw ValidationError("objective", "must be one of mae, mse, r2");
}

/// Value to minimize. r2 is maximized, so it enters negated; undefined or
/// non-finite results rank last.
inline double objective_value(const MetricsReport& m, Objective o) {
  double v = 0.0;
  switch (o) {
    case Objective::mae: v = m.mae; break;
    case Objective::mse: v = m.mse; break;
    case Objective::r2: v = -m.r2; break;
  }
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

using ParamGrid = std::map<std::string, std::vector<double>>;
using ParamSet = std::vector<std::pair<std::string, double>>;  // sorted by name

inline constexpr std::array<std::string_view, 11> kSweepParams = {
    "batch_size", "depth", "epochs", "grad_clip", "l2", "learning_rate", "m", "proj_dim", "sigma", "sparsity_nodes", "sparsity_z"};

inline bool is_integer_param(std::string_view name) {
  return name == "batch_size" || name == "depth" || name == "epochs" || name == "proj_dim";
}

/// Sets one named hyperparameter. `m` is the encoder smoothing of the
/// preprocessor; every other name is a regressor setting.
inline void apply_param(BonsaiConfig& bc, PreprocessConfig& pc, std::string_view name, double value) {
  if (!std::isfinite(value)) throw ValidationError(std::string(name), "value must be finite");
  if (is_integer_param(name)) {
    if (value != std::floor(value) || std::abs(value) > 1e9)
      throw ValidationError(std::string(name), "value must be an integer");
    const int v = static_cast<int>(value);
    if (name == "batch_size") bc.batch_size = v;
    else if (name == "depth") bc.depth = v;
    else if (name == "epochs") bc.epochs = v;
    else bc.proj_dim = v;
    return;
  }
  if (name == "grad_clip") bc.grad_clip = value;
  else if (name == "l2") bc.l2 = value;
  else if (name == "learning_rate") bc.learning_rate = value;
  else if (name == "sigma") bc.sigma = value;
  else if (name == "sparsity_nodes") bc.sparsity_nodes = value;
  else if (name == "sparsity_z") bc.sparsity_z = value;
  else if (name == "m") {
    if (value < 0.0) throw ValidationError("m", "must be non-negative");
    pc.m = value;
  } else {
    throw ValidationError(std::string(name), "unknown sweep parameter");
  }
}

struct SweepSpec {
  ParamGrid grid;
  Objective objective = Objective::mae;
  std::size_t budget = 64;  // max trials; the enumeration is truncated beyond it
  std::uint64_t seed = 0;
  BonsaiConfig base;
  PreprocessConfig preprocess;
  int latency_warmup = 1;
  int latency_reps = 5;
};

struct Trial {
  std::size_t index = 0;
  ParamSet params;
  MetricsReport metrics;
  std::size_t model_size = 0;
  double latency_ms = 0.0;  // median model-only time per sample
};

struct SweepResult {
  std::vector<Trial> trials;
  std::size_t best = 0;
};

/// Every combination in lexicographic order of parameter name, the last
/// parameter varying fastest, truncated to `budget` entries.
inline std::vector<ParamSet> enumerate_grid(const ParamGrid& grid, std::size_t budget) {
  if (grid.empty()) throw ValidationError("grid", "empty grid");
  if (budget < 1) throw ValidationError("budget", "must be at least 1");
  for (const auto& [name, values] : grid)
    if (values.empty()) throw ValidationError(name, "no candidate values");
  std::vector<ParamSet> out;
  std::vector<std::size_t> pos(grid.size(), 0);
  while (out.size() < budget) {
    ParamSet p;
    std::size_t k = 0;
    for (const auto& [name, values] : grid) p.emplace_back(name, values[pos[k++]]);
    out.push_back(std::move(p));
    std::size_t level = grid.size();
    auto it = grid.rbegin();
    for (; level > 0; --level, ++it) {
      if (++pos[level - 1] < it->second.size()) break;
      pos[level - 1] = 0;
    }
    if (level == 0) break;
  }
  return out;
}

/// Tie rule: objective, then smaller model, then parameter values compared
/// lexicographically.
inline bool trial_before(const Trial& a, const Trial& b, Objective o) {
  const double va = objective_value(a.metrics, o);
  const double vb = objective_value(b.metrics, o);
  if (va != vb) return va < vb;
  if (a.model_size != b.model_size) return a.model_size < b.model_size;
  return a.params < b.params;
}

inline std::size_t best_trial(std::span<const Trial> trials, Objective o) {
  if (trials.empty()) throw ValidationError("trials", "no trials");
  std::size_t best = 0;
  for (std::size_t i = 1; i < trials.size(); ++i)
    if (trial_before(trials[i], trials[best], o)) best = i;
  return best;
}

struct TrialConfig {
  BonsaiConfig bonsai;
  PreprocessConfig preprocess;
};

inline TrialConfig trial_config(const SweepSpec& spec, const ParamSet& params) {
  TrialConfig t{spec.base, spec.preprocess};
  for (const auto& [name, value] : params) apply_param(t.bonsai, t.preprocess, name, value);
  t.bonsai.seed = spec.seed;
  t.bonsai.input_dim = static_cast<int>(t.preprocess.features.size());
  t.bonsai.validate();
  return t;
}

namespace detail {

struct SweepRun {
  SweepResult result;
  std::vector<BonsaiModel> models;
  std::vector<FittedPreprocessor> fitted;
};

inline SweepRun sweep_with_models(const SweepSpec& spec, const Dataset& train, const Dataset& test) {
  const auto combos = enumerate_grid(spec.grid, spec.budget);
  if (test.empty()) throw ValidationError("records", "test split is empty");
  std::vector<TrialConfig> configs;
  for (const auto& c : combos) configs.push_back(trial_config(spec, c));

  SweepRun run;
  run.result.trials.resize(combos.size());
  run.models.resize(combos.size());
  run.fitted.resize(combos.size());
  parallel_for(combos.size(), [&](std::size_t i) {
    const auto& tc = configs[i];
    auto fitted = fit_pipeline(train, tc.preprocess);
    const auto tr = transform_dataset(train, fitted);
    const auto te = transform_dataset(test, fitted);
    auto model = pfk::train(tc.bonsai, tr.features, tr.targets).model;
    std::vector<double> yhat;
    for (std::size_t r = 0; r < te.targets.size(); ++r) yhat.push_back(predict(model, te.features.row(r)));
    auto& t = run.result.trials[i];
    t.index = i;
    t.params = combos[i];
    t.metrics = evaluate_metrics(te.targets, yhat);
    t.model_size = model_size(model);
    run.models[i] = std::move(model);
    run.fitted[i] = std::move(fitted);
  });
  for (std::size_t i = 0; i < combos.size(); ++i) {
    run.result.trials[i].latency_ms =
        measure_latency(run.models[i], run.fitted[i], test.records(), spec.latency_warmup, spec.latency_reps)
            .model_only.median_ms;
  }
  run.result.best = best_trial(run.result.trials, spec.objective);
  return run;
}

}  // namespace detail

/// Exhaustive (budget-truncated) grid evaluation; each trial fits the
/// preprocessor and regressor on `train` with the sweep seed and scores on
/// `test`. Trials run concurrently; results are ordered by trial index.
inline SweepResult sweep(const SweepSpec& spec, const Dataset& train, const Dataset& test) {
  return detail::sweep_with_models(spec, train, test).result;
}

/// Next-round grid: every swept parameter collapses to {c - s/2, c, c + s/2}
/// around the incumbent value c, where s is the current mean spacing
/// (max - min) / (count - 1). Integer parameters move by floor(s / 2) and
/// collapse to {c} once that reaches 0. Candidates the regressor rejects are
/// dropped; single-valued parameters stay fixed.
inline ParamGrid narrow_grid(const ParamGrid& grid, const ParamSet& center, const SweepSpec& spec) {
  ParamGrid out;
  for (const auto& [name, values] : grid) {
    auto it = std::find_if(center.begin(), center.end(), [&](const auto& p) { return p.first == name; });
    if (it == center.end()) throw ValidationError(name, "incumbent lacks this parameter");
    const double c = it->second;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) {
      out[name] = {c};
      continue;
    }
    const double s = (sorted.back() - sorted.front()) / static_cast<double>(sorted.size() - 1);
    const double h = is_integer_param(name) ? std::floor(s / 2.0) : s / 2.0;
    if (!(h > 0.0)) {
      out[name] = {c};
      continue;
    }
    std::vector<double> candidates;
    for (double v : {c - h, c, c + h}) {
      try {
        BonsaiConfig bc = spec.base;
        PreprocessConfig pc = spec.preprocess;
        apply_param(bc, pc, name, v);
        bc.input_dim = static_cast<int>(pc.features.size());
        bc.validate();
        candidates.push_back(v);
      } catch (const ValidationError&) {
        if (v == c) throw;
      }
    }
    out[name] = std::move(candidates);
  }
  return out;
}

struct RoundRecord {
  int round = 0;
  double best_objective = 0.0;  // incumbent objective after the round
  ParamSet best_params;
  ParamGrid grid;
  SweepResult sweep;
};

struct LoopResult {
  std::vector<RoundRecord> history;
  Trial best;
  TrialConfig config;
  BonsaiModel model;
  FittedPreprocessor fitted;
};

/// Repeated sweeps. The first round uses the configured grid; each later round
/// sweeps the narrowed grid around the incumbent. A round's winner replaces
/// the incumbent only if it ranks strictly before it under the tie rule, so
/// the recorded best objective never increases.
inline LoopResult optimize_loop(const SweepSpec& spec, const Dataset& train, const Dataset& test, int rounds) {
  if (rounds < 1) throw ValidationError("rounds", "must be at least 1");
  LoopResult out;
  ParamGrid grid = spec.grid;
  for (int r = 0; r < rounds; ++r) {
    SweepSpec round_spec = spec;
    round_spec.grid = grid;
    auto run = detail::sweep_with_models(round_spec, train, test);
    const auto& winner = run.result.trials[run.result.best];
    if (r == 0 || trial_before(winner, out.best, spec.objective)) {
      out.best = winner;
      out.model = run.models[run.result.best];
      out.fitted = run.fitted[run.result.best];
      out.config = trial_config(spec, winner.params);
    }
    out.history.push_back({r + 1, objective_value(out.best.metrics, spec.objective), out.best.params, grid,
                           std::move(run.result)});
    grid = narrow_grid(grid, out.best.params, spec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exports

/// trial, one column per parameter, mae, mse, r2, model_size_bytes, latency_ms
inline std::string sweep_csv(const SweepResult& result) {
  using detail::format_double;
  std::string out = "trial";
  if (!result.trials.empty())
    for (const auto& [name, v] : result.trials.front().params) out += ',' + name;
  out += ",mae,mse,r2,model_size_bytes,latency_ms\n";
  for (const auto& t : result.trials) {
    out += std::to_string(t.index);
    for (const auto& [name, v] : t.params) out += ',' + format_double(v);
    out += ',' + format_double(t.metrics.mae) + ',' + format_double(t.metrics.mse) + ',' +
           format_double(t.metrics.r2) + ',' + std::to_string(t.model_size) + ',' + format_double(t.latency_ms) + '\n';
  }
  return out;
}

/// round, best objective, then the incumbent parameters
inline std::string history_csv(const LoopResult& loop, Objective o) {
  using detail::format_double;
  std::string out = "round," + std::string(to_string(o));
  if (!loop.history.empty())
    for (const auto& [name, v] : loop.history.front().best_params) out += ',' + name;
  out += '\n';
  for (const auto& h : loop.history) {
    const double shown = o == Objective::r2 ? -h.best_objective : h.best_objective;
    out += std::to_string(h.round) + ',' + format_double(shown);
    for (const auto& [name, v] : h.best_params) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const ParamSet& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, v] : p) {
    if (is_integer_param(name)) j[name] = static_cast<long long>(v);
    else j[name] = v;
  }
  return j;
}

}  // namespace pfk
