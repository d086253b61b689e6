#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "pdp/builtins.hpp"
#include "pdp/verification.hpp"
#include "support.hpp"

namespace pdp {
namespace {

using nlohmann::json;

/// Solved builtins are shared across tests; solving twice is wasted time.
const ValueFunction& solved(const std::string& name, std::size_t n_t) {
  static std::map<std::pair<std::string, std::size_t>, ValueFunction> cache;
  auto key = std::make_pair(name, n_t);
  auto it = cache.find(key);
  if (it == cache.end()) {
    SolverOptions opt;
    opt.tol_fix = 1e-9;
    it = cache.emplace(key, solve_value(builtin_problem(name), {n_t, 0}, opt)).first;
  }
  return it->second;
}

TEST(ModelPaths, StoppedAtStartTime) {
  const auto data = builtin_problem("running_max_pathdep");
  RandomStream rng(1);
  for (int i = 0; i < 50; ++i) {
    const double s = rng.uniform(0.0, 1.0);
    const auto x = sample_model_path(data, s, rng);
    EXPECT_EQ(x.horizon(), data.horizon);
    EXPECT_LE(x.jump_times().size(), 3u);
    EXPECT_EQ(x, x.stop(s));
  }
}

TEST(Dpp, DegenerateIntervalHasZeroResidual) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  RandomStream rng(2);
  for (int i = 0; i < 10; ++i) {
    const double s = v.grid().at(rng.below(v.grid().M));
    const auto x = sample_model_path(data, s, rng);
    EXPECT_LE(dpp_residual(data, v, s, s, x), 1e-12);
  }
}

TEST(Dpp, ThroughHorizonIsFixedPointResidual) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  RandomStream rng(3);
  for (int i = 0; i < 10; ++i) {
    const double s = v.grid().at(rng.below(v.grid().M));
    const auto x = sample_model_path(data, s, rng);
    EXPECT_NEAR(dpp_residual(data, v, s, 1.0, x), fixed_point_residual(data, v, s, x), 1e-12);
  }
}

TEST(Dpp, SampledResidualOnBenchmark) {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_dpp(data, solved("two_control_markov", 16), 5e-3, {30, 4, 2});
  EXPECT_TRUE(r.pass) << r.worst;
  EXPECT_EQ(r.samples, 30u);
}

TEST(FixedPoint, ConstantAndRunningModels) {
  const auto c = check_fixed_point(builtin_problem("constant_terminal"), solved("constant_terminal", 16), 1e-8, {20, 1, 1});
  EXPECT_TRUE(c.pass) << c.worst;
  const auto u = check_fixed_point(builtin_problem("unit_running"), solved("unit_running", 64), 1e-4, {20, 1, 1});
  EXPECT_TRUE(u.pass) << u.worst;
  const auto& v = solved("two_control_markov", 16);
  const auto b = check_fixed_point(builtin_problem("two_control_markov"), v, 10 * v.tol_fix, {20, 1, 1});
  EXPECT_TRUE(b.pass) << b.worst;
}

TEST(Contraction, ConstantShiftResponse) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  const std::size_t L = v.lifted_nodes(), n_t = v.quadrature().n_t;
  const std::vector<double> eta(v.table().begin() + static_cast<std::ptrdiff_t>(n_t * L),
                                v.table().begin() + static_cast<std::ptrdiff_t>((n_t + 1) * L));
  const IntervalOperator op(data, v.grid(), v.partition().knots, 0, n_t, eta, v.quadrature());
  std::vector<double> psi(op.size()), shifted(op.size()), a(op.size()), b(op.size());
  RandomStream rng(5);
  const double c = 0.75;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    psi[i] = rng.uniform(0.0, 3.0);
    shifted[i] = psi[i] + c;
  }
  op.apply(psi, a);
  op.apply(shifted, b);
  const double kappa = v.partition().kappa[0];
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GE(b[i] - a[i], -1e-12);
    worst = std::max(worst, b[i] - a[i]);
  }
  EXPECT_LE(worst, kappa * c + 1e-12);
  EXPECT_GT(worst, 0.0);
}

TEST(Contraction, SampledPairsWithinBound) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  const auto r = estimate_contraction_all(data, v, {100, 7, 2});
  EXPECT_TRUE(r.pass) << r.worst;
  ASSERT_EQ(r.details["intervals"].size(), v.partition().intervals());
  for (const auto& iv : r.details["intervals"]) EXPECT_LE(iv["ratio"].get<double>(), iv["bound"].get<double>());
}

TEST(Lipschitz, ConstantModelRatioZero) {
  const auto data = builtin_problem("constant_terminal");
  const auto& v = solved("constant_terminal", 16);
  const auto r = estimate_lipschitz(data, v, 1e-9, {50, 1, 1});
  EXPECT_LE(r.worst, 1e-7);
}

TEST(Lipschitz, PathDependentBenchmarkUnderCap) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  const auto r = estimate_lipschitz(data, v, default_lipschitz_cap(data, v), {100, 2, 2});
  EXPECT_TRUE(r.pass) << r.worst << " cap " << r.tolerance;
  EXPECT_GT(r.worst, 0.0);
}

TEST(Bracket, ConstantModelConvergesToThree) {
  const auto data = builtin_problem("constant_terminal");
  const auto r = check_monotone_bracket(data, solved("constant_terminal", 16));
  EXPECT_TRUE(r.pass) << r.details.dump();
}

TEST(Bracket, BenchmarkDecaysGeometrically) {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_monotone_bracket(data, solved("two_control_markov", 16), {}, 2);
  EXPECT_TRUE(r.pass) << r.notes;
}

TEST(Bracket, FixedPointSliceIsInvariant) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  const std::size_t L = v.lifted_nodes(), n_t = v.quadrature().n_t, M = v.grid().M;
  const std::vector<double> eta(v.table().end() - static_cast<std::ptrdiff_t>(L), v.table().end());
  const IntervalOperator op(data, v.grid(), v.partition().knots, M - n_t, M, eta, v.quadrature());
  const std::vector<double> slice(v.table().end() - static_cast<std::ptrdiff_t>(op.size()), v.table().end());
  std::vector<double> out(op.size());
  op.apply(slice, out);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], slice[i], 1e-8);
}

TEST(Minimax, ConstantModelZeroGradient) {
  const auto data = builtin_problem("constant_terminal");
  const auto r = check_minimax_along_characteristics(data, solved("constant_terminal", 16), 0.0,
                                                     CadlagPath::constant({0.0}, 1.0), {{0.0}}, 1e-6);
  EXPECT_TRUE(r.pass) << r.notes;
}

TEST(Minimax, DeterministicSingleControl) {
  // Linear terminal cost, so grid interpolation is exact and
  // V(t, x) = (1 - t) / 2 + (x(t) + 1 - t) / 2 along the drift.
  const auto data = test::make_problem(json::parse(R"js({
    "constants": {"Clam": 0.0, "Cf": 3.0},
    "drift": ["1"], "intensity": "0", "running_cost": "0.5", "terminal_cost": "0.5 * feat[0]"})js"));
  const auto v = solve_value(data, {32, 0});
  EXPECT_NEAR(v.query(data, 0.0, CadlagPath::constant({0.5}, 1.0)), 1.25, 1e-9);
  const auto r = check_minimax_along_characteristics(data, v, 0.0, CadlagPath::constant({0.5}, 1.0),
                                                     {{-1.0}, {0.0}, {1.0}}, 1e-6);
  EXPECT_TRUE(r.pass) << r.worst << " " << r.details.dump();
}

TEST(Minimax, BenchmarkWithFiveGradients) {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_minimax_along_characteristics(data, solved("two_control_markov", 16), 0.25,
                                                     CadlagPath::constant({0.0}, 1.0),
                                                     {{-1.0}, {-0.5}, {0.0}, {0.5}, {1.0}}, 1e-2);
  EXPECT_TRUE(r.pass) << r.notes;
  EXPECT_EQ(r.details["z"].size(), 5u);
}

TEST(Regularity, ExampleValues) {
  const auto r = regularity_counterexample();
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.worst, 0.0);
  EXPECT_EQ(r.details["value_at_t0"].get<double>(), 1.0);
  for (const auto& e : r.details["value_after_t0"]) EXPECT_EQ(e["value"].get<double>(), 2.0);
  for (const auto& g : r.details["metric_gap"])
    EXPECT_EQ(g["distance"].get<double>(), 1.0 / g["n"].get<double>());
}

TEST(FlowBounds, BuiltinsWithinBounds) {
  for (const char* name : {"two_control_markov", "running_max_pathdep"}) {
    const auto r = check_flow_bounds(builtin_problem(name), 1e-2, {100, 3, 2});
    EXPECT_TRUE(r.pass) << name << " " << r.worst;
  }
}

TEST(Stability, IntervalOperatorLipschitz) {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_interval_stability(data, solved("two_control_markov", 16), {40, 1, 2});
  EXPECT_TRUE(r.pass) << r.worst;
}

TEST(Reports, JsonCarriesVerdict) {
  CheckReport r;
  r.name = "demo";
  r.worst = 0.5;
  r.tolerance = 1.0;
  r.samples = 3;
  r.finish();
  const auto j = report_to_json(r);
  EXPECT_EQ(j["name"], "demo");
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j["samples"], 3);
}

TEST(Reports, SameSeedSameReport) {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = solved("two_control_markov", 16);
  EXPECT_EQ(report_to_json(check_dpp(data, v, 5e-3, {10, 9, 1})).dump(),
            report_to_json(check_dpp(data, v, 5e-3, {10, 9, 3})).dump());
}

}  // namespace
}  // namespace pdp
