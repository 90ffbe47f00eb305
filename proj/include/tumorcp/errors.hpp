#pragma once

#include <stdexcept>
#include <string>

namespace tumorcp {

/// Bad input: invalid parameters, mismatched grids, assumption violations.
/// Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Solver non-convergence or non-finite values during time stepping.
/// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An experiment's expected property did not hold (e.g. an error column was
/// not strictly decreasing). Maps to CLI exit code 3.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace tumorcp
