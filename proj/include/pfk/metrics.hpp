#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>

namespace pfk {

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("metric inputs differ in length");
  if (y.empty()) throw std::invalid_argument("metric inputs are empty");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  const double total = std::transform_reduce(y.begin(), y.end(), yhat.begin(), 0.0, std::plus<>{},
                                             [](double a, double b) { return std::abs(a - b); });
  return total / static_cast<double>(y.size());
}

inline double mse(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  const double total = std::transform_reduce(y.begin(), y.end(), yhat.begin(), 0.0, std::plus<>{},
                                             [](double a, double b) { return (a - b) * (a - b); });
  return total / static_cast<double>(y.size());
}

/// Coefficient of determination. Throws for fewer than 2 points or constant y.
inline double r2(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  if (y.size() < 2) throw std::invalid_argument("r2 needs at least 2 points");
  const double mean = std::reduce(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const double ss_tot = std::transform_reduce(y.begin(), y.end(), 0.0, std::plus<>{},
                                              [mean](double a) { return (a - mean) * (a - mean); });
  if (!(ss_tot > 0.0)) throw std::invalid_argument("r2 undefined for constant targets");
  return 1.0 - mse(y, yhat) * static_cast<double>(y.size()) / ss_tot;
}

struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
  std::size_t n = 0;
};

/// All three metrics; r2 is NaN where it is undefined instead of throwing.
inline MetricsReport evaluate_metrics(std::span<const double> y, std::span<const double> yhat) {
  MetricsReport m;
  m.mse = mse(y, yhat);
  m.mae = mae(y, yhat);
  m.n = y.size();
  try {
    m.r2 = r2(y, yhat);
  } catch (const std::invalid_argument&) {
  }
  return m;
}

/// Streaming error accumulator used as the inference-time post-processing
/// step: it tracks predictions and, when ground truth is known, running errors.
class MetricsAccumulator {
 public:
  void observe(double prediction, std::optional<double> truth) {
    ++predictions_;
    last_ = prediction;
    if (!truth) return;
    const double r = prediction - *truth;
    ++n_;
    abs_sum_ += std::abs(r);
    sq_sum_ += r * r;
  }

  std::size_t predictions() const noexcept { return predictions_; }
  std::size_t labelled() const noexcept { return n_; }
  double last() const noexcept { return last_; }
  double mae() const noexcept { return n_ ? abs_sum_ / static_cast<double>(n_) : 0.0; }
  double mse() const noexcept { return n_ ? sq_sum_ / static_cast<double>(n_) : 0.0; }

 private:
  std::size_t predictions_ = 0;
  std::size_t n_ = 0;
  double abs_sum_ = 0.0;
  double sq_sum_ = 0.0;
  double last_ = 0.0;
};

}  // namespace pfk
