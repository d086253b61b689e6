#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdp/error.hpp"

namespace pdp {

/// Names an expression may refer to besides literals, `t` and `feat[i]`.
struct ExprSymbols {
  std::size_t n_features = 0;
  std::size_t n_controls = 1;
  /// `ctrl[name]` tables: values[table][control].
  std::vector<std::string> table_names;
  std::vector<std::vector<double>> table_values;
};

/// Syntax or name-resolution failure; carries a 1-based line/column.
class ExprSyntaxError : public InputError {
 public:
  using InputError::InputError;
};

/// Coefficient expression over (t, lifted features, control).
///
/// Grammar: + - * / with the usual precedence, unary minus, parentheses,
/// min(a, b, ...), max(a, b, ...), exp(a), sin(a), abs(a), numeric
/// literals, `t`, `feat[i]`, `ctrl[name]`. The source is parsed once and
/// compiled into one postfix program per control with constants folded.
class Expression {
 public:
  Expression();  // the literal 0

  static Expression parse(std::string_view source, const ExprSymbols& symbols);
  static Expression constant(double value);

  /// Throws NumericError on division by zero.
  double eval(double t, std::span<const double> feat, std::size_t control) const;

  /// Re-parseable canonical text (fully determined by the syntax tree).
  std::string canonical() const;

  /// Index i when the whole expression is `feat[i]`, otherwise -1.
  int bare_feature() const;
  /// True when the value never depends on t, features or control.
  bool is_constant() const;
  std::vector<std::size_t> features_used() const;

 private:
  struct Impl;
  explicit Expression(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

}  // namespace pdp
