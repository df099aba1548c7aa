#pragma once

#include <stdexcept>
#include <string>

namespace vecmatch {

/// Bad or inconsistent input data (schema problems, empty support, degenerate data).
/// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (divergence, singular systems). CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vecmatch
