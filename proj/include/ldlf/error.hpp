#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ldlf {

/// Invalid hyperparameters or call arguments (bad sizes, ranges, constraints).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or invalid dataset content.
class DataError : public std::runtime_error {
 public:
  enum class Kind {
    kMalformedHeader,
    kRowArity,
    kNegativeProbability,
    kSumOutOfTolerance,
    kNonFinite,
    kMalformedValue,
    kEmpty,
  };

  DataError(Kind kind, std::size_t row, const std::string& what)
      : std::runtime_error(what), kind_(kind), row_(row) {}

  Kind kind() const noexcept { return kind_; }
  /// 1-based sample row; 0 when the error is not tied to a row.
  std::size_t row() const noexcept { return row_; }

 private:
  Kind kind_;
  std::size_t row_;
};

/// Non-finite values produced during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system failures (unreadable input, unwritable output).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ldlf
