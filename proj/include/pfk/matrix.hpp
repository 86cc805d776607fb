#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfk {

using FeatureVector = std::vector<double>;

/// Row-major matrix of transformed features with named columns.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> names) : names_(std::move(names)) {}

  void add_row(std::span<const double> row) {
    if (row.size() != names_.size()) throw std::invalid_argument("row width does not match column count");
    values_.insert(values_.end(), row.begin(), row.end());
  }

  std::size_t rows() const noexcept { return names_.empty() ? 0 : values_.size() / names_.size(); }
  std::size_t cols() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * names_.size(), names_.size());
  }

  double at(std::size_t i, std::size_t j) const { return values_[i * names_.size() + j]; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i) out.push_back(at(i, j));
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

}  // namespace pfk
