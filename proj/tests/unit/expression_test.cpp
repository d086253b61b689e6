#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "pdp/expression.hpp"
#include "pdp/rng.hpp"

namespace pdp {
namespace {

ExprSymbols symbols() {
  ExprSymbols s;
  s.n_features = 2;
  s.n_controls = 2;
  s.table_names = {"rate"};
  s.table_values = {{0.5, 2.0}};
  return s;
}

double eval(const std::string& src, double t = 0.0, std::vector<double> feat = {0.0, 0.0},
            std::size_t control = 0) {
  return Expression::parse(src, symbols()).eval(t, feat, control);
}

TEST(Expression, ArithmeticPrecedence) {
  EXPECT_DOUBLE_EQ(eval("1 + 2 * 3"), 7.0);
  EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3"), 9.0);
  EXPECT_DOUBLE_EQ(eval("8 / 4 / 2"), 1.0);
  EXPECT_DOUBLE_EQ(eval("1 - 2 - 3"), -4.0);
  EXPECT_DOUBLE_EQ(eval("-2 * -3"), 6.0);
  EXPECT_DOUBLE_EQ(eval("2.5e-1"), 0.25);
}

TEST(Expression, FunctionsAndVariables) {
  EXPECT_DOUBLE_EQ(eval("min(3, t, 5)", 2.0), 2.0);
  EXPECT_DOUBLE_EQ(eval("max(feat[0], feat[1])", 0.0, {-1.0, 4.0}), 4.0);
  EXPECT_DOUBLE_EQ(eval("abs(feat[0])", 0.0, {-1.5, 0.0}), 1.5);
  EXPECT_DOUBLE_EQ(eval("exp(t)", 1.0), std::exp(1.0));
  EXPECT_DOUBLE_EQ(eval("sin(t)", 0.3), std::sin(0.3));
  EXPECT_DOUBLE_EQ(eval("ctrl[rate] * t", 3.0, {0.0, 0.0}, 1), 6.0);
  EXPECT_DOUBLE_EQ(eval("ctrl[rate] * t", 3.0, {0.0, 0.0}, 0), 1.5);
}

TEST(Expression, DivisionByZeroIsNumeric) {
  EXPECT_THROW(eval("1 / feat[0]"), NumericError);
}

TEST(Expression, SyntaxErrorsCarryPosition) {
  try {
    Expression::parse("1 +\n  * 2", symbols());
    FAIL() << "expected a syntax error";
  } catch (const ExprSyntaxError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2, column 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Expression::parse("feat[2]", symbols()), ExprSyntaxError);
  EXPECT_THROW(Expression::parse("ctrl[speed]", symbols()), ExprSyntaxError);
  EXPECT_THROW(Expression::parse("x + 1", symbols()), ExprSyntaxError);
  EXPECT_THROW(Expression::parse("min()", symbols()), ExprSyntaxError);
  EXPECT_THROW(Expression::parse("(1", symbols()), ExprSyntaxError);
}

TEST(Expression, Introspection) {
  EXPECT_EQ(Expression::parse("feat[1]", symbols()).bare_feature(), 1);
  EXPECT_EQ(Expression::parse("feat[1] + 0", symbols()).bare_feature(), -1);
  EXPECT_TRUE(Expression::parse("2 * 3", symbols()).is_constant());
  EXPECT_FALSE(Expression::parse("ctrl[rate]", symbols()).is_constant());
  EXPECT_EQ(Expression::parse("feat[1] * feat[0] + feat[1]", symbols()).features_used(),
            (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(Expression().eval(0.0, {}, 0), 0.0);
  EXPECT_DOUBLE_EQ(Expression::constant(1.25).eval(0.0, {}, 0), 1.25);
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(3.0), "3");
  for (double v : {1.0 / 3.0, 1e-300, -2.5e17, 6.02214076e23}) EXPECT_EQ(std::stod(format_real(v)), v);
}

/// Random expression source over t, feat[0..1] and ctrl[rate].
std::string random_source(RandomStream& rng, int depth) {
  if (depth == 0 || rng.uniform() < 0.25) {
    switch (rng.below(4)) {
      case 0: return format_real(std::round(rng.uniform(-5.0, 5.0) * 8.0) / 8.0);
      case 1: return "t";
      case 2: return "feat[" + std::to_string(rng.below(2)) + "]";
      default: return "ctrl[rate]";
    }
  }
  const std::string a = random_source(rng, depth - 1);
  const std::string b = random_source(rng, depth - 1);
  switch (rng.below(7)) {
    case 0: return "(" + a + ") + (" + b + ")";
    case 1: return "(" + a + ") - (" + b + ")";
    case 2: return "(" + a + ") * (" + b + ")";
    case 3: return "-(" + a + ")";
    case 4: return "min(" + a + ", " + b + ")";
    case 5: return "max(" + a + ", " + b + ", 0)";
    default: return "sin(" + a + ")";
  }
}

TEST(Expression, PropertyCanonicalFormIsStableAndEquivalent) {
  RandomStream rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string src = random_source(rng, 4);
    const Expression e = Expression::parse(src, symbols());
    const Expression again = Expression::parse(e.canonical(), symbols());
    EXPECT_EQ(again.canonical(), e.canonical()) << src;
    for (int k = 0; k < 5; ++k) {
      const double t = rng.uniform(0.0, 1.0);
      const std::vector<double> feat{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
      const std::size_t c = rng.below(2);
      EXPECT_EQ(again.eval(t, feat, c), e.eval(t, feat, c)) << src;
    }
  }
}

}  // namespace
}  // namespace pdp
