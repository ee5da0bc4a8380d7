#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bnl {

// A distribution or model parameter outside its domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent matrix/vector dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cholesky factorization hit a non-positive (or non-finite) pivot.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(std::size_t pivot, double value)
      : std::runtime_error("matrix is not positive definite: pivot " +
                           std::to_string(pivot) + " has value " +
                           std::to_string(value)),
        pivot_(pivot),
        value_(value) {}

  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

// An update failed inside a chain; carries the 1-based sweep index.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(std::size_t sweep, const std::string& what)
      : std::runtime_error("sweep " + std::to_string(sweep) + ": " + what),
        sweep_(sweep) {}

  std::size_t sweep() const noexcept { return sweep_; }

 private:
  std::size_t sweep_;
};

// Unreadable input, unknown column, unparseable cell, bad schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bnl
