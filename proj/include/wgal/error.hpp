#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wgal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expression text rejected by the parser. `offset()` is the byte offset of
/// the offending token in the input.
class ParseError : public Error {
 public:
  enum class Kind { syntax, unknown_identifier, variable_out_of_range };

  ParseError(Kind kind, std::size_t offset, const std::string& what)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

/// Expression evaluation produced a division by zero or a non-finite value.
class EvalError : public Error {
 public:
  enum class Kind { division_by_zero, non_finite, dimension_mismatch };

  EvalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite value inside a loss/gradient/training computation.
class NumericalError : public Error {
 public:
  NumericalError(std::string component, std::ptrdiff_t sample, const std::string& what,
                 std::ptrdiff_t step = -1)
      : Error(what), component_(std::move(component)), sample_(sample), step_(step) {}

  const std::string& component() const noexcept { return component_; }
  std::ptrdiff_t sample_index() const noexcept { return sample_; }
  std::ptrdiff_t step() const noexcept { return step_; }

 private:
  std::string component_;
  std::ptrdiff_t sample_;
  std::ptrdiff_t step_;
};

/// Experiment configuration failed schema validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Linear solver failure in the finite-difference oracles.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double condition_estimate = 0.0)
      : Error(what), condition_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A theoretical bound whose preconditions do not hold for the given inputs.
class BoundNotApplicable : public Error {
 public:
  using Error::Error;
};

}  // namespace wgal
