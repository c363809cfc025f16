#pragma once

#include <stdexcept>
#include <string>

namespace oilid {

/// Invalid user input or model description (bad geometry, inconsistent config).
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents; carries the offending row when known.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what, long row = -1)
      : std::runtime_error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what),
        row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

/// Iterative solver, integrator or filter failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oilid
