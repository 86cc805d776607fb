#pragma once

// Correlation-based feature ranking and the named feature subsets built from it.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pfk/detail/text.hpp"
#include "pfk/error.hpp"
#include "pfk/log.hpp"
#include "pfk/matrix.hpp"

namespace pfk {

/// |Pearson r| between x and y, in [0, 1]. Accumulates co-moments in one
/// pass (Welford). A zero-variance input yields 0 and a warning.
inline double pearson_abs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_abs: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson_abs: need at least 2 points");
  double mx = 0.0, my = 0.0, cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    cxx += dx * (x[i] - mx);
    cyy += dy * (y[i] - my);
    cxy += dx * (y[i] - my);
  }
  if (!(cxx > 0.0) || !(cyy > 0.0)) {
    warn("pearson_abs: zero-variance input, correlation defined as 0");
    return 0.0;
  }
  return std::min(1.0, std::abs(cxy) / std::sqrt(cxx * cyy));
}

struct RankedFeature {
  std::string name;
  double r = 0.0;

  bool operator==(const RankedFeature&) const = default;
};

/// Features by descending |r|; equal scores are ordered by name.
struct CorrelationRanking {
  std::vector<RankedFeature> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool operator==(const CorrelationRanking&) const = default;
};

inline CorrelationRanking rank_features(const FeatureMatrix& data, std::span<const double> target) {
  if (data.rows() != target.size()) throw std::invalid_argument("rank_features: row count differs from target length");
  if (data.rows() < 2) throw std::invalid_argument("rank_features: need at least 2 rows");
  CorrelationRanking out;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto col = data.column(j);
    out.entries.push_back({data.names()[j], pearson_abs(col, target)});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.r != b.r) return a.r > b.r;
    return a.name < b.name;
  });
  return out;
}

/// Two-column CSV (feature,r) for external plotting.
inline std::string ranking_csv(const CorrelationRanking& ranking) {
  std::string out = "feature,r\n";
  for (const auto& e : ranking.entries) out += e.name + ',' + detail::format_double(e.r) + '\n';
  return out;
}

/// Named, ordered feature selection such as "F4_A".
struct FeatureSubset {
  std::string name;
  std::vector<std::string> features;

  std::size_t size() const noexcept { return features.size(); }
  bool empty() const noexcept { return features.empty(); }
  bool contains(const std::string& f) const { return std::find(features.begin(), features.end(), f) != features.end(); }
  bool operator==(const FeatureSubset&) const = default;
};

/// First n ranked features, named "F{n}_{tag}".
inline FeatureSubset top_n(const CorrelationRanking& ranking, std::size_t n, const std::string& tag) {
  if (n < 1 || n > ranking.size())
    throw ValidationError("n", "subset size " + std::to_string(n) + " outside [1, " + std::to_string(ranking.size()) + "]");
  FeatureSubset s{"F" + std::to_string(n) + "_" + tag, {}};
  for (std::size_t i = 0; i < n; ++i) s.features.push_back(ranking.entries[i].name);
  return s;
}

/// a's features in order, then b's features not already present.
inline FeatureSubset subset_union(const FeatureSubset& a, const FeatureSubset& b) {
  FeatureSubset out{a.name + "|" + b.name, a.features};
  for (const auto& f : b.features)
    if (!out.contains(f)) out.features.push_back(f);
  return out;
}

/// a's features that also appear in b, in a's order. May be empty; training
/// on an empty subset is rejected downstream.
inline FeatureSubset subset_intersection(const FeatureSubset& a, const FeatureSubset& b) {
  FeatureSubset out{a.name + "&" + b.name, {}};
  for (const auto& f : a.features)
    if (b.contains(f)) out.features.push_back(f);
  return out;
}

}  // namespace pfk
