#pragma once

// Preprocessing chain: outlier removal (IQR fences), rate/temperature
// standardization with Z-scores, feature assembly and M-estimate encoding of
// categorical columns. Fit on training data, then apply with transform().

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfk/dataset.hpp"
#include "pfk/error.hpp"
#include "pfk/matrix.hpp"
#include "pfk/stats.hpp"

namespace pfk {

inline constexpr std::array<std::string_view, 6> kNumericColumns = {"lpdb", "l", "ph", "temp", "ln_ku", "beta_t"};
inline constexpr std::array<std::string_view, 3> kCategoricalColumns = {"class", "fold", "f_type"};

/// All model-facing columns, numeric first.
inline std::vector<std::string> all_feature_names() {
  std::vector<std::string> out(kNumericColumns.begin(), kNumericColumns.end());
  out.insert(out.end(), kCategoricalColumns.begin(), kCategoricalColumns.end());
  return out;
}

inline constexpr std::size_t kLnKuIndex = 4;

inline std::optional<std::size_t> numeric_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumericColumns.size(); ++i)
    if (kNumericColumns[i] == name) return i;
  return std::nullopt;
}

inline bool is_categorical(std::string_view name) {
  return std::find(kCategoricalColumns.begin(), kCategoricalColumns.end(), name) != kCategoricalColumns.end();
}

/// Raw numeric field by column name.
inline double numeric_value(const ProteinRecord& r, std::string_view name) {
  if (name == "lpdb") return static_cast<double>(r.lpdb);
  if (name == "l") return static_cast<double>(r.length);
  if (name == "ph") return r.ph;
  if (name == "temp") return r.temp;
  if (name == "ln_ku") return r.ln_ku;
  if (name == "beta_t") return r.beta_t;
  throw ValidationError(std::string(name), "not a numeric record field");
}

inline std::string_view categorical_value(const ProteinRecord& r, std::string_view name) {
  if (name == "class") return r.protein_class;
  if (name == "fold") return r.fold;
  if (name == "f_type") return to_string(r.f_type);
  throw ValidationError(std::string(name), "not a categorical record field");
}

// ---------------------------------------------------------------------------
// Outlier fences

struct IqrBounds {
  double q1 = 0.0;
  double q3 = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double v) const noexcept { return v >= lower && v <= upper; }
  bool operator==(const IqrBounds&) const = default;
};

/// Tukey fences at Q1 - 1.5 IQR and Q3 + 1.5 IQR (linear-interpolation quartiles).
inline IqrBounds fit_iqr(std::span<const double> values) {
  if (values.size() < 4) throw ValidationError("values", "IQR fences need at least 4 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  IqrBounds b;
  b.q1 = stats::quantile_sorted(sorted, 0.25);
  b.q3 = stats::quantile_sorted(sorted, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lower = b.q1 - 1.5 * iqr;
  b.upper = b.q3 + 1.5 * iqr;
  return b;
}

struct FilterResult {
  Dataset kept;
  std::size_t removed = 0;
};

/// Keeps records whose bounded fields all lie inside their fences (inclusive).
inline FilterResult filter_outliers(const Dataset& data, const std::map<std::string, IqrBounds>& bounds) {
  std::vector<ProteinRecord> kept;
  std::size_t removed = 0;
  for (const auto& r : data) {
    bool inside = true;
    for (const auto& [name, b] : bounds) {
      if (!b.contains(numeric_value(r, name))) {
        inside = false;
        break;
      }
    }
    if (inside)
      kept.push_back(r);
    else
      ++removed;
  }
  return {Dataset(std::move(kept), data.label()), removed};
}

// ---------------------------------------------------------------------------
// Rate standardization and Z-scores

struct RateStandardizationParams {
  double t_ref = 25.0 + kCelsiusToKelvin;  // Kelvin
  double delta_h = 0.0;                    // activation enthalpy, J/mol
  double r_gas = 8.314;                    // J/(mol K)

  bool operator==(const RateStandardizationParams&) const = default;
};

/// Transfers a log rate measured at `temp_celsius` to the reference
/// temperature (Eyring transition-state form):
///   ln k(T_ref) = ln k(T) + ln(T_ref / T) + (dH / R)(1/T - 1/T_ref)
inline double standardize_rate(double ln_k, double temp_celsius, const RateStandardizationParams& p) {
  if (!(p.t_ref > 0.0)) throw ValidationError("t_ref", "reference temperature must be positive");
  if (!(temp_celsius > -kCelsiusToKelvin)) throw ValidationError("temp", "temperature below absolute zero");
  const double t = temp_celsius + kCelsiusToKelvin;
  if (t == p.t_ref) return ln_k;
  return ln_k + std::log(p.t_ref / t) + (p.delta_h / p.r_gas) * (1.0 / t - 1.0 / p.t_ref);
}

struct ZScoreParams {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  bool operator==(const ZScoreParams&) const = default;
};

inline ZScoreParams fit_zscore(std::span<const double> values) {
  if (values.empty()) throw ValidationError("values", "Z-score needs at least one value");
  ZScoreParams p;
  p.mean = stats::mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - p.mean) * (v - p.mean);
  p.std = std::sqrt(ss / static_cast<double>(values.size()));
  return p;
}

/// (value - mean) / std; a constant column (std == 0) maps to 0.
inline double apply_zscore(double value, const ZScoreParams& p) noexcept {
  return p.std > 0.0 ? (value - p.mean) / p.std : 0.0;
}

// ---------------------------------------------------------------------------
// M-estimate target encoding

struct CategoryStats {
  std::size_t count = 0;
  double target_sum = 0.0;

  bool operator==(const CategoryStats&) const = default;
};

struct MEstimateTable {
  double m = 20.0;
  double prior = 0.0;
  std::map<std::string, CategoryStats, std::less<>> per_category;

  bool operator==(const MEstimateTable&) const = default;
};

inline MEstimateTable fit_m_estimate(std::span<const std::string> categories, std::span<const double> targets,
                                     double m = 20.0) {
  if (categories.size() != targets.size())
    throw ValidationError("targets", "category and target lengths differ");
  if (categories.empty()) throw ValidationError("targets", "M-estimate needs at least one observation");
  if (!(m >= 0.0)) throw ValidationError("m", "smoothing weight must be non-negative");
  MEstimateTable t;
  t.m = m;
  t.prior = stats::mean(targets);
  for (std::size_t i = 0; i < categories.size(); ++i) {
    auto& s = t.per_category[categories[i]];
    ++s.count;
    s.target_sum += targets[i];
  }
  return t;
}

/// (count * category_mean + m * prior) / (count + m); unseen categories get the prior.
inline double encode_category(std::string_view category, const MEstimateTable& t) {
  auto it = t.per_category.find(category);
  if (it == t.per_category.end()) return t.prior;
  const auto n = static_cast<double>(it->second.count);
  if (n + t.m <= 0.0) return t.prior;
  return (it->second.target_sum + t.m * t.prior) / (n + t.m);
}

// ---------------------------------------------------------------------------
// Full chain

struct PreprocessConfig {
  double m = 20.0;
  double delta_h = 0.0;
  std::vector<std::string> zscore_columns = {"lpdb", "l", "ph", "temp"};
  std::vector<std::string> features = all_feature_names();
};

inline constexpr int kPreprocessorFormatVersion = 1;

struct FittedPreprocessor {
  std::map<std::string, IqrBounds> iqr_bounds;
  std::map<std::string, ZScoreParams> zscore;
  std::map<std::string, MEstimateTable> encoders;
  RateStandardizationParams rate_params;
  std::vector<std::string> feature_order;
  std::size_t removed_outliers = 0;

  bool operator==(const FittedPreprocessor&) const = default;
};

namespace detail {

inline void check_feature_list(const std::vector<std::string>& features) {
  if (features.empty()) throw ValidationError("features", "feature list must not be empty");
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (!numeric_index(f) && !is_categorical(f)) throw ValidationError(f, "unknown feature");
    if (!seen.insert(f).second) throw ValidationError(f, "duplicate feature");
  }
}

}  // namespace detail

/// Same fitted stage parameters, consuming a different feature list.
inline FittedPreprocessor with_features(FittedPreprocessor fitted, std::vector<std::string> features) {
  detail::check_feature_list(features);
  fitted.feature_order = std::move(features);
  return fitted;
}

/// Numeric fields after rate standardization and Z-scoring, indexed like
/// kNumericColumns, plus the standardized target when the record has one.
struct StandardizedRecord {
  std::array<double, kNumericColumns.size()> numeric{};
  std::optional<double> target;
};

/// Standardization stage: ln_ku and ln_kf moved to the reference temperature,
/// configured columns Z-scored.
inline StandardizedRecord standardize(const ProteinRecord& r, const FittedPreprocessor& fitted) {
  StandardizedRecord s;
  for (std::size_t i = 0; i < kNumericColumns.size(); ++i) s.numeric[i] = numeric_value(r, kNumericColumns[i]);
  s.numeric[kLnKuIndex] = standardize_rate(r.ln_ku, r.temp, fitted.rate_params);
  for (const auto& [name, params] : fitted.zscore) {
    if (auto idx = numeric_index(name)) s.numeric[*idx] = apply_zscore(s.numeric[*idx], params);
  }
  if (r.ln_kf) s.target = standardize_rate(*r.ln_kf, r.temp, fitted.rate_params);
  return s;
}

/// Assembly stage: picks columns in feature_order and encodes categoricals
/// (Z-scoring the encoded value when that column is configured for it).
inline FeatureVector assemble(const StandardizedRecord& s, const ProteinRecord& r, const FittedPreprocessor& fitted) {
  FeatureVector out;
  out.reserve(fitted.feature_order.size());
  for (const auto& name : fitted.feature_order) {
    if (auto idx = numeric_index(name)) {
      out.push_back(s.numeric[*idx]);
    } else {
      auto it = fitted.encoders.find(name);
      if (it == fitted.encoders.end()) throw ValidationError(name, "no encoder fitted for feature");
      double v = encode_category(categorical_value(r, name), it->second);
      if (auto z = fitted.zscore.find(name); z != fitted.zscore.end()) v = apply_zscore(v, z->second);
      out.push_back(v);
    }
  }
  return out;
}

inline FeatureVector transform(const ProteinRecord& r, const FittedPreprocessor& fitted) {
  return assemble(standardize(r, fitted), r, fitted);
}

/// Standardized target ln k_f at the reference temperature.
inline double target_value(const ProteinRecord& r, const FittedPreprocessor& fitted) {
  if (!r.ln_kf) throw ValidationError("ln_kf", "record '" + r.psn + "' has no target");
  return standardize_rate(*r.ln_kf, r.temp, fitted.rate_params);
}

inline FittedPreprocessor fit_pipeline(const Dataset& data, const PreprocessConfig& config = {}) {
  detail::check_feature_list(config.features);
  for (const auto& c : config.zscore_columns) {
    if (!numeric_index(c) && !is_categorical(c)) throw ValidationError(c, "unknown Z-score column");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].ln_kf) throw ValidationError("ln_kf", "fitting requires a target on every record", i);
  }

  FittedPreprocessor fitted;
  for (auto name : kNumericColumns) {
    std::vector<double> col;
    col.reserve(data.size());
    for (const auto& r : data) col.push_back(numeric_value(r, name));
    fitted.iqr_bounds[std::string(name)] = fit_iqr(col);
  }
  auto [kept, removed] = filter_outliers(data, fitted.iqr_bounds);
  if (kept.empty()) throw ValidationError("records", "every record was removed as an outlier");
  fitted.removed_outliers = removed;
  fitted.rate_params.delta_h = config.delta_h;

  std::vector<double> targets;
  targets.reserve(kept.size());
  for (const auto& r : kept) targets.push_back(target_value(r, fitted));

  for (auto name : kCategoricalColumns) {
    std::vector<std::string> cats;
    cats.reserve(kept.size());
    for (const auto& r : kept) cats.emplace_back(categorical_value(r, name));
    fitted.encoders[std::string(name)] = fit_m_estimate(cats, targets, config.m);
  }

  // Numeric columns are scored after rate standardization, categorical ones
  // after encoding.
  for (const auto& name : config.zscore_columns) {
    std::vector<double> col;
    col.reserve(kept.size());
    for (const auto& r : kept) {
      if (name == "ln_ku")
        col.push_back(standardize_rate(r.ln_ku, r.temp, fitted.rate_params));
      else if (is_categorical(name))
        col.push_back(encode_category(categorical_value(r, name), fitted.encoders.at(name)));
      else
        col.push_back(numeric_value(r, name));
    }
    fitted.zscore[name] = fit_zscore(col);
  }

  fitted.feature_order = config.features;
  return fitted;
}

struct LabeledData {
  FeatureMatrix features;
  std::vector<double> targets;
};

/// Transforms every record; records must carry targets.
inline LabeledData transform_dataset(const Dataset& data, const FittedPreprocessor& fitted) {
  LabeledData out{FeatureMatrix(fitted.feature_order), {}};
  out.targets.reserve(data.size());
  for (const auto& r : data) {
    auto s = standardize(r, fitted);
    if (!s.target) throw ValidationError("ln_kf", "record '" + r.psn + "' has no target");
    out.features.add_row(assemble(s, r, fitted));
    out.targets.push_back(*s.target);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON persistence

inline nlohmann::json to_json(const FittedPreprocessor& f) {
  using nlohmann::json;
  json j;
  j["format"] = "pfk-preprocessor";
  j["version"] = kPreprocessorFormatVersion;
  j["feature_order"] = f.feature_order;
  j["removed_outliers"] = f.removed_outliers;
  j["rate"] = {{"t_ref", f.rate_params.t_ref}, {"delta_h", f.rate_params.delta_h}, {"r_gas", f.rate_params.r_gas}};
  j["iqr"] = json::object();
  for (const auto& [k, b] : f.iqr_bounds)
    j["iqr"][k] = {{"q1", b.q1}, {"q3", b.q3}, {"lower", b.lower}, {"upper", b.upper}};
  j["zscore"] = json::object();
  for (const auto& [k, z] : f.zscore) j["zscore"][k] = {{"mean", z.mean}, {"std", z.std}};
  j["encoders"] = json::object();
  for (const auto& [k, t] : f.encoders) {
    json cats = json::object();
    for (const auto& [c, s] : t.per_category) cats[c] = {{"count", s.count}, {"sum", s.target_sum}};
    j["encoders"][k] = {{"m", t.m}, {"prior", t.prior}, {"categories", cats}};
  }
  return j;
}

inline FittedPreprocessor preprocessor_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pfk-preprocessor")
      throw ValidationError("format", "not a preprocessor document");
    const int version = j.at("version").get<int>();
    if (version != kPreprocessorFormatVersion)
      throw ValidationError("version", "unsupported preprocessor version " + std::to_string(version));
    FittedPreprocessor f;
    f.feature_order = j.at("feature_order").get<std::vector<std::string>>();
    detail::check_feature_list(f.feature_order);
    f.removed_outliers = j.at("removed_outliers").get<std::size_t>();
    const auto& rate = j.at("rate");
    f.rate_params = {rate.at("t_ref").get<double>(), rate.at("delta_h").get<double>(), rate.at("r_gas").get<double>()};
    for (const auto& [k, b] : j.at("iqr").items()) {
      f.iqr_bounds[k] = {b.at("q1").get<double>(), b.at("q3").get<double>(), b.at("lower").get<double>(),
                         b.at("upper").get<double>()};
    }
    for (const auto& [k, z] : j.at("zscore").items()) {
      if (!numeric_index(k) && !is_categorical(k)) throw ValidationError(k, "unknown Z-score column");
      f.zscore[k] = {z.at("mean").get<double>(), z.at("std").get<double>()};
    }
    for (const auto& [k, t] : j.at("encoders").items()) {
      MEstimateTable table;
      table.m = t.at("m").get<double>();
      table.prior = t.at("prior").get<double>();
      for (const auto& [c, s] : t.at("categories").items())
        table.per_category[c] = {s.at("count").get<std::size_t>(), s.at("sum").get<double>()};
      f.encoders[k] = std::move(table);
    }
    for (const auto& name : f.feature_order) {
      if (is_categorical(name) && !f.encoders.contains(name)) throw ValidationError(name, "missing encoder table");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("preprocessor", std::string("malformed document: ") + e.what());
  }
}

}  // namespace pfk
