#pragma once

#include <stdexcept>
#include <string>

namespace pdp {

/// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
  Input,    ///< malformed documents, schema violations, bad arguments
  Numeric,  ///< divergence, non-contraction, runaway simulations
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Query outside the represented time range of a path.
class HorizonError : public InputError {
 public:
  using InputError::InputError;
};

/// Exhaustive enumeration would exceed the configured budget.
class BudgetError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace pdp
