#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mnqp {

/// A QPS/MPS input could not be read. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_{line} {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The raw problem is inconsistent (e.g. a fixed variable outside its bounds).
/// `index()` names the offending row or column of the raw problem.
class ProblemError : public std::runtime_error {
 public:
  ProblemError(std::ptrdiff_t index, const std::string& what)
      : std::runtime_error(what), index_{index} {}

  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

/// The problem was rejected by the acceptance filter (too few inequalities).
class FilterError : public ProblemError {
 public:
  using ProblemError::ProblemError;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization hit a pivot below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(std::ptrdiff_t pivot, const std::string& what)
      : std::runtime_error(what), pivot_{pivot} {}

  /// Pivot (row) index, or -1 when the backend does not report one.
  std::ptrdiff_t pivot() const noexcept { return pivot_; }

 private:
  std::ptrdiff_t pivot_;
};

}  // namespace mnqp
