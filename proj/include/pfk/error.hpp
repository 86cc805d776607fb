#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace pfk {

/// A value failed a schema or range check. `field()` names the offending
/// column or parameter; `row()` is set when the value came from a CSV data row
/// (0-based, header excluded).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message,
                  std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(compose(field, message, row)),
        field_(std::move(field)),
        row_(row) {}

  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  static std::string compose(const std::string& field, const std::string& message,
                             std::optional<std::size_t> row) {
    std::string out;
    if (row) out += "row " + std::to_string(*row) + ", ";
    if (!field.empty()) out += "column '" + field + "': ";
    return out + message;
  }

  std::string field_;
  std::optional<std::size_t> row_;
};

/// Text that does not parse at all (wrong arity, non-numeric numeric field).
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Truncated or corrupt binary model data.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t offset, const std::string& message)
      : std::runtime_error("offset " + std::to_string(offset) + ": " + message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pfk
