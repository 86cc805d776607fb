#pragma once

// Per-sample inference timing for the regressor alone and for the full
// record -> prediction pipeline, with a per-stage time breakdown.

#include <algorithm>
#include <array>
#include <chrono>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "pfk/bonsai.hpp"
#include "pfk/metrics.hpp"
#include "pfk/preprocess.hpp"
#include "pfk/stats.hpp"

namespace pfk {

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  std::size_t count = 0;
};

inline LatencyStats summarize_latency(std::vector<double> samples_ms) {
  LatencyStats s;
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  s.median_ms = stats::quantile_sorted(samples_ms, 0.5);
  s.p95_ms = stats::quantile_sorted(samples_ms, 0.95);
  s.mean_ms = stats::mean(samples_ms);
  s.count = samples_ms.size();
  return s;
}

struct StageShare {
  std::string name;
  double mean_ms = 0.0;  // per sample
  double fraction = 0.0;
};

struct LatencyReport {
  LatencyStats model_only;
  LatencyStats pipeline;
  std::vector<StageShare> stages;  // standardization, feature_extraction, regressor, post_process
};

namespace detail {

inline volatile double latency_sink = 0.0;

inline void keep_alive(double v) { latency_sink = v; }

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point from) {
  return std::chrono::duration<double, std::milli>(Clock::now() - from).count();
}

}  // namespace detail

/// Times `predict_fn` (FeatureVector span -> double) over `samples`. Each
/// repetition sweeps all samples and contributes one per-sample duration
/// (sweep time / sample count); the first `warmup` repetitions are dropped.
/// Stage shares come from separate per-stage sweeps in the same repetition.
template <class PredictFn>
  requires std::invocable<PredictFn&, std::span<const double>>
LatencyReport measure_latency(PredictFn&& predict_fn, const FittedPreprocessor& fitted,
                              std::span<const ProteinRecord> samples, int warmup, int reps) {
  if (reps < 1) throw ValidationError("reps", "must be at least 1");
  if (warmup < 0) throw ValidationError("warmup", "must be non-negative");
  if (samples.empty()) throw ValidationError("samples", "need at least one sample");
  const auto n = static_cast<double>(samples.size());

  std::vector<FeatureVector> vectors;
  vectors.reserve(samples.size());
  for (const auto& r : samples) vectors.push_back(transform(r, fitted));

  std::vector<double> model_ms, pipeline_ms;
  std::array<double, 4> stage_ms{};
  std::vector<StandardizedRecord> standardized(samples.size());
  std::vector<FeatureVector> assembled(samples.size());
  std::vector<double> predictions(samples.size());

  for (int rep = 0; rep < warmup + reps; ++rep) {
    const bool keep = rep >= warmup;
    double acc = 0.0;

    auto t = detail::Clock::now();
    for (const auto& v : vectors) acc += predict_fn(std::span<const double>(v));
    if (keep) model_ms.push_back(detail::elapsed_ms(t) / n);

    MetricsAccumulator monitor;
    t = detail::Clock::now();
    for (const auto& r : samples) {
      const auto s = standardize(r, fitted);
      const auto v = assemble(s, r, fitted);
      monitor.observe(predict_fn(std::span<const double>(v)), s.target);
    }
    if (keep) pipeline_ms.push_back(detail::elapsed_ms(t) / n);
    acc += monitor.mae();

    std::array<double, 4> part{};
    t = detail::Clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) standardized[i] = standardize(samples[i], fitted);
    part[0] = detail::elapsed_ms(t);
    t = detail::Clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) assembled[i] = assemble(standardized[i], samples[i], fitted);
    part[1] = detail::elapsed_ms(t);
    t = detail::Clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) predictions[i] = predict_fn(std::span<const double>(assembled[i]));
    part[2] = detail::elapsed_ms(t);
    MetricsAccumulator post;
    t = detail::Clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) post.observe(predictions[i], standardized[i].target);
    part[3] = detail::elapsed_ms(t);
    acc += post.mae();

    if (keep)
      for (std::size_t s = 0; s < part.size(); ++s) stage_ms[s] += part[s];
    detail::keep_alive(acc);
  }

  LatencyReport report;
  report.model_only = summarize_latency(std::move(model_ms));
  report.pipeline = summarize_latency(std::move(pipeline_ms));
  double total = 0.0;
  for (double v : stage_ms) total += v;
  static constexpr std::array<const char*, 4> kStageNames = {"standardization", "feature_extraction", "regressor",
                                                             "post_process"};
  for (std::size_t s = 0; s < stage_ms.size(); ++s) {
    report.stages.push_back({kStageNames[s], stage_ms[s] / (n * reps),
                             total > 0.0 ? stage_ms[s] / total : 0.25});
  }
  return report;
}

inline LatencyReport measure_latency(const BonsaiModel& model, const FittedPreprocessor& fitted,
                                     std::span<const ProteinRecord> samples, int warmup, int reps) {
  return measure_latency([&model](std::span<const double> x) { return predict(model, x); }, fitted, samples, warmup,
                         reps);
}

}  // namespace pfk
