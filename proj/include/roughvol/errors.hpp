#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roughvol {

/// Base class of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (alpha range, query time, index).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Integration bounds given out of order (requires 0 <= s0 <= s1 <= t).
class OrderingError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed or inconsistent input data.
class InputError : public Error {
 public:
  using Error::Error;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  /// First fine-grid index whose state was non-finite or exceeded the guard.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Query times that do not fall on the oracle's fine grid.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Weight matrix H not symmetric positive definite after regularization.
class WeightError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(double condition, const std::string& what)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// The information matrix is not invertible.
class FisherSingularError : public Error {
 public:
  using Error::Error;
};

/// Caller asked for a result whose validity conditions do not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Not enough usable points to fit a log-log slope.
class RegressionError : public Error {
 public:
  using Error::Error;
};

/// Every replication of a Monte Carlo cell failed.
class CellError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration text. The CLI treats this as a usage error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace roughvol
