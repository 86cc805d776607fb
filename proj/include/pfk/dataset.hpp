#pragma once

// Protein kinetics records: schema, CSV ingestion, A/B split, train/test
// partitioning and a seeded synthetic generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfk/detail/random.hpp"
#include "pfk/detail/text.hpp"
#include "pfk/error.hpp"

namespace pfk {

inline constexpr double kCelsiusToKelvin = 273.15;

enum class FoldType { two_state, non_two_state };

inline std::string_view to_string(FoldType t) {
  return t == FoldType::two_state ? "2S" : "N2S";
}

inline std::optional<FoldType> parse_fold_type(std::string_view s) {
  s = detail::trim(s);
  if (s == "2S") return FoldType::two_state;
  if (s == "N2S") return FoldType::non_two_state;
  return std::nullopt;
}

/// One protein's kinetics observation.
struct ProteinRecord {
  std::string psn;            // short protein name
  std::string protein_class;  // "class" column
  std::string fold;           // SCOP fold
  std::int64_t lpdb = 0;      // continuous folded residues
  std::int64_t length = 1;    // "l" column: total residues
  double ph = 7.0;
  double temp = 25.0;  // degrees Celsius
  FoldType f_type = FoldType::two_state;
  double ln_ku = 0.0;
  double beta_t = 0.5;
  std::optional<double> ln_kf;  // absent for inference-only rows

  bool operator==(const ProteinRecord&) const = default;
};

/// CSV column order. The header row must match it exactly.
inline constexpr std::array<std::string_view, 11> kCsvColumns = {
    "psn", "class", "fold", "lpdb", "l", "ph", "temp", "f_type", "ln_ku", "beta_t", "ln_kf"};

/// Throws ValidationError naming the first field that breaks a record invariant.
inline void validate(const ProteinRecord& r, std::optional<std::size_t> row = std::nullopt) {
  if (r.psn.empty()) throw ValidationError("psn", "must not be empty", row);
  if (r.length < 1) throw ValidationError("l", "must be a positive integer", row);
  if (r.lpdb < 0) throw ValidationError("lpdb", "must be non-negative", row);
  if (r.lpdb > r.length) throw ValidationError("lpdb", "must not exceed l", row);
  if (!(r.ph >= 0.0 && r.ph <= 14.0)) throw ValidationError("ph", "must lie in [0, 14]", row);
  if (!std::isfinite(r.temp) || r.temp <= -kCelsiusToKelvin)
    throw ValidationError("temp", "must be above absolute zero", row);
  if (!(r.beta_t >= 0.0 && r.beta_t <= 1.0))
    throw ValidationError("beta_t", "must lie in [0, 1]", row);
  if (!std::isfinite(r.ln_ku)) throw ValidationError("ln_ku", "must be finite", row);
  if (r.ln_kf && !std::isfinite(*r.ln_kf)) throw ValidationError("ln_kf", "must be finite", row);
}

/// Immutable collection of records plus a provenance label.
class Dataset {
 public:
  Dataset(std::vector<ProteinRecord> records, std::string label)
      : records_(std::move(records)), label_(std::move(label)) {
    if (label_.empty()) throw ValidationError("label", "dataset label must not be empty");
  }

  const std::vector<ProteinRecord>& records() const noexcept { return records_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ProteinRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<ProteinRecord> records_;
  std::string label_;
};

namespace detail {

// RFC 4180-style splitter: quoted fields may hold commas, quotes ("") and
// newlines. Blank lines are dropped.
inline std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;  // current row has content
  auto end_row = [&] {
    if (any || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (in_quotes) throw ParseError("", "unterminated quoted field", rows.size());
  end_row();
  return rows;
}

inline std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos && trim(s) == s) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

/// Parses CSV text in kCsvColumns order. With `has_header`, the first row must
/// be the exact header. Row indices in errors count data rows from 0.
inline std::vector<ProteinRecord> parse_records(std::string_view csv_text, bool has_header = true) {
  auto rows = detail::split_csv(csv_text);
  std::size_t first = 0;
  if (has_header) {
    if (rows.empty()) throw ParseError("", "missing header row");
    const auto& header = rows.front();
    bool ok = header.size() == kCsvColumns.size();
    for (std::size_t c = 0; ok && c < header.size(); ++c) {
      ok = detail::trim(header[c]) == kCsvColumns[c];
    }
    if (!ok) throw ParseError("", "header must be 'psn,class,fold,lpdb,l,ph,temp,f_type,ln_ku,beta_t,ln_kf'");
    first = 1;
  }

  std::vector<ProteinRecord> out;
  out.reserve(rows.size() - first);
  for (std::size_t r = first; r < rows.size(); ++r) {
    const std::size_t row = r - first;
    const auto& f = rows[r];
    if (f.size() != kCsvColumns.size()) {
      const auto col = f.size() < kCsvColumns.size() ? std::string(kCsvColumns[f.size()]) : std::string("ln_kf");
      throw ParseError(col,
                       "expected " + std::to_string(kCsvColumns.size()) + " fields, found " + std::to_string(f.size()),
                       row);
    }
    auto real = [&](std::size_t c) {
      auto v = detail::parse_double(f[c]);
      if (!v) throw ParseError(std::string(kCsvColumns[c]), "not a finite number: '" + f[c] + "'", row);
      return *v;
    };
    auto integer = [&](std::size_t c) {
      auto v = detail::parse_int(f[c]);
      if (!v) throw ParseError(std::string(kCsvColumns[c]), "not an integer: '" + f[c] + "'", row);
      return *v;
    };

    ProteinRecord rec;
    rec.psn = std::string(detail::trim(f[0]));
    rec.protein_class = std::string(detail::trim(f[1]));
    rec.fold = std::string(detail::trim(f[2]));
    rec.lpdb = integer(3);
    rec.length = integer(4);
    rec.ph = real(5);
    rec.temp = real(6);
    auto ft = parse_fold_type(f[7]);
    if (!ft) throw ParseError("f_type", "expected 2S or N2S, found '" + f[7] + "'", row);
    rec.f_type = *ft;
    rec.ln_ku = real(8);
    rec.beta_t = real(9);
    if (!detail::trim(f[10]).empty()) rec.ln_kf = real(10);
    validate(rec, row);
    out.push_back(std::move(rec));
  }
  return out;
}

/// Inverse of parse_records: header plus one row per record, numbers in their
/// shortest round-trip form.
inline std::string serialize_records(const std::vector<ProteinRecord>& records) {
  std::string out;
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    if (c) out += ',';
    out += kCsvColumns[c];
  }
  out += '\n';
  for (const auto& r : records) {
    out += detail::quote_csv(r.psn) + ',' + detail::quote_csv(r.protein_class) + ',' + detail::quote_csv(r.fold) + ',';
    out += std::to_string(r.lpdb) + ',' + std::to_string(r.length) + ',';
    out += detail::format_double(r.ph) + ',' + detail::format_double(r.temp) + ',';
    out += std::string(to_string(r.f_type)) + ',';
    out += detail::format_double(r.ln_ku) + ',' + detail::format_double(r.beta_t) + ',';
    if (r.ln_kf) out += detail::format_double(*r.ln_kf);
    out += '\n';
  }
  return out;
}

struct SplitPair {
  Dataset a;
  Dataset b;
};

using SplitRule = std::function<bool(const ProteinRecord&)>;

/// Default A/B rule: two-state proteins go to A, non-two-state to B.
inline bool is_two_state(const ProteinRecord& r) { return r.f_type == FoldType::two_state; }

/// Splits records into A (rule true) and B (rule false), preserving order.
/// A protein name landing on both sides violates disjointness and throws.
inline SplitPair split_ab(const Dataset& data, const SplitRule& goes_to_a = is_two_state) {
  std::vector<ProteinRecord> a, b;
  for (const auto& r : data) (goes_to_a(r) ? a : b).push_back(r);
  std::set<std::string_view> names_a;
  for (const auto& r : a) names_a.insert(r.psn);
  for (const auto& r : b) {
    if (names_a.contains(r.psn))
      throw ValidationError("psn", "protein '" + r.psn + "' falls on both sides of the A/B split");
  }
  return {Dataset(std::move(a), data.label() + "-A"), Dataset(std::move(b), data.label() + "-B")};
}

struct Partition {
  Dataset train;
  Dataset test;
};

/// Seeded random train/test partition. |test| = round(fraction * n), clamped
/// so both sides hold at least one record; original order is kept within each
/// side.
inline Partition train_test_partition(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test_fraction", "must lie strictly between 0 and 1");
  const std::size_t n = data.size();
  if (n < 2) throw ValidationError("records", "need at least 2 records to partition");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  detail::Rng rng(detail::derive_seed(seed, 0x7061727469ULL));
  rng.shuffle(std::span(order));
  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

  std::vector<ProteinRecord> train, test;
  train.reserve(n - n_test);
  test.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).push_back(data[i]);
  return {Dataset(std::move(train), data.label() + "/train"), Dataset(std::move(test), data.label() + "/test")};
}

namespace synthetic {

struct FoldProfile {
  std::string_view fold;
  std::string_view protein_class;
  double effect;  // additive shift of ln(k_f) at 25 C
};

inline constexpr std::array<FoldProfile, 9> kFolds = {{
    {"globin-like", "alpha", 1.2},
    {"four-helical up-and-down bundle", "alpha", 1.6},
    {"lambda repressor-like DNA-binding domains", "alpha", 2.0},
    {"SH3-like barrel", "beta", -0.4},
    {"Ig-like beta-sandwich", "beta", -1.2},
    {"OB-fold", "beta", -0.6},
    {"ferredoxin-like", "alpha+beta", 0.0},
    {"beta-Grasp (ubiquitin-like)", "alpha+beta", 0.3},
    {"flavodoxin-like", "alpha/beta", -1.5},
}};

inline constexpr std::array<double, 10> kTemperatures = {5, 10, 15, 20, 22, 25, 25, 25, 30, 37};

inline constexpr double kNoiseStd = 0.35;

/// Folding rate at 25 C before noise:
///   5.2 - 2.4 ln(l / 80) + fold effect + 1.1 [2S] + 2.0 (beta_t - 0.6) + 0.35 ln_ku(25 C)
inline double ln_kf_at_reference(std::int64_t length, double fold_effect, FoldType f_type, double beta_t,
                                 double ln_ku_ref) {
  return 5.2 - 2.4 * std::log(static_cast<double>(length) / 80.0) + fold_effect +
         (f_type == FoldType::two_state ? 1.1 : 0.0) + 2.0 * (beta_t - 0.6) + 0.35 * ln_ku_ref;
}

/// Moves a 25 C log-rate to `temp_c` with the enthalpy-free Eyring transfer,
/// the inverse of the standardization applied during preprocessing.
inline double ln_k_at_temperature(double ln_k_ref, double temp_c) {
  return ln_k_ref - std::log((25.0 + kCelsiusToKelvin) / (temp_c + kCelsiusToKelvin));
}

}  // namespace synthetic

/// Seeded synthetic dataset. Every record satisfies the schema invariants and
/// ln_kf follows synthetic::ln_kf_at_reference plus N(0, 0.35^2) noise,
/// reported at the record's measurement temperature.
inline Dataset synthesize_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n", "must be at least 1");
  detail::Rng rng(detail::derive_seed(seed, 0x73796e7468ULL));
  std::vector<ProteinRecord> records;
  records.reserve(n);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 0; i < n; ++i) {
    ProteinRecord r;
    std::string id = std::to_string(i + 1);
    r.psn = "SYN" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    const auto& fold = synthetic::kFolds[rng.index(synthetic::kFolds.size())];
    r.fold = std::string(fold.fold);
    r.protein_class = std::string(fold.protein_class);
    r.length = rng.integer(35, 260);
    r.lpdb = r.length - rng.integer(0, r.length / 10);
    r.ph = std::round(rng.uniform(5.0, 8.0) * 10.0) / 10.0;
    r.temp = synthetic::kTemperatures[rng.index(synthetic::kTemperatures.size())];
    const double p_two_state = r.length < 110 ? 0.7 : 0.35;
    r.f_type = rng.uniform() < p_two_state ? FoldType::two_state : FoldType::non_two_state;
    r.beta_t = std::round(rng.uniform(0.3, 0.95) * 100.0) / 100.0;
    const double ln_ku_ref = rng.normal(-2.5, 1.8);
    const double ln_kf_ref =
        synthetic::ln_kf_at_reference(r.length, fold.effect, r.f_type, r.beta_t, ln_ku_ref) +
        rng.normal(0.0, synthetic::kNoiseStd);
    r.ln_ku = synthetic::ln_k_at_temperature(ln_ku_ref, r.temp);
    r.ln_kf = synthetic::ln_k_at_temperature(ln_kf_ref, r.temp);
    records.push_back(std::move(r));
  }
  return Dataset(std::move(records), "synthetic");
}

}  // namespace pfk
