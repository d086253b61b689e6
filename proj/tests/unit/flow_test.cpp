#include <cmath>

#include <gtest/gtest.h>

#include "pdp/error.hpp"
#include "pdp/flow.hpp"
#include "support.hpp"

namespace pdp {
namespace {

using nlohmann::json;
using test::make_problem;

TEST(TimeGrid, IndexAfterAndEndpoints) {
  const TimeGrid g{1.0, 8};
  EXPECT_EQ(g.at(8), 1.0);
  EXPECT_EQ(g.index_after(0.0), 1u);
  EXPECT_EQ(g.index_after(0.125), 2u);
  EXPECT_EQ(g.index_after(0.13), 2u);
  EXPECT_EQ(g.index_after(1.0), 8u);
  EXPECT_EQ(TimeGrid::with_step(1.0, 0.3).M, 4u);
  EXPECT_THROW(TimeGrid::with_step(1.0, 0.0), InputError);
}

TEST(OpenLoopControl, PiecewiseLookup) {
  const OpenLoopControl a{{0.25, 0.5}, {0, 1, 0}};
  EXPECT_EQ(a.at(0.0), 0u);
  EXPECT_EQ(a.at(0.25), 1u);
  EXPECT_EQ(a.at(0.49), 1u);
  EXPECT_EQ(a.at(0.5), 0u);
  EXPECT_EQ(a.next_break(0.25), 0.5);
  EXPECT_TRUE(std::isinf(a.next_break(0.6)));
  EXPECT_EQ(a.from(0.3), (OpenLoopControl{{0.5}, {1, 0}}));
}

TEST(Flow, ZeroDriftStaysPut) {
  const auto data = make_problem({{"drift", {"0"}}});
  const auto x = CadlagPath::constant({1.5}, 1.0);
  const auto phi = solve_flow(data, 0.3, x, OpenLoopControl::constant(0), 0.05);
  for (std::size_t k = 0; k < phi.node_count(); ++k) EXPECT_EQ(phi.state(k)[0], 1.5);
  EXPECT_EQ(phi.times.front(), 0.3);
  EXPECT_EQ(phi.times.back(), 1.0);
}

TEST(Flow, LinearDriftMatchesExponential) {
  const auto data = make_problem({{"drift", {"feat[0]"}}, {"constants", {{"Cf", 5.0}}}});
  const double s = 0.2;
  const auto phi = solve_flow(data, s, CadlagPath::constant({1.0}, 1.0), OpenLoopControl::constant(0), 1e-3);
  double worst = 0.0;
  for (std::size_t k = 0; k < phi.node_count(); ++k)
    worst = std::max(worst, std::abs(phi.state(k)[0] - std::exp(phi.times[k] - s)));
  EXPECT_LE(worst, 1e-8);
}

TEST(Flow, SwitchedDriftTent) {
  const auto data = make_problem({{"controls", {"up", "down"}},
                                  {"default_control", "up"},
                                  {"tables", {{"v", {{"up", 1.0}, {"down", -1.0}}}}},
                                  {"drift", {"ctrl[v]"}}});
  const double s = 0.1, m = 0.55;
  const OpenLoopControl alpha{{m}, {0, 1}};
  const auto phi = solve_flow(data, s, CadlagPath::constant({0.0}, 1.0), alpha, 0.1);
  bool saw_switch = false;
  for (std::size_t k = 0; k < phi.node_count(); ++k) {
    const double t = phi.times[k];
    const double expected = t <= m ? t - s : (m - s) - (t - m);
    EXPECT_NEAR(phi.state(k)[0], expected, 1e-14) << t;
    saw_switch = saw_switch || t == m;
  }
  EXPECT_TRUE(saw_switch);
}

TEST(Flow, RestrictionToStartIsStoppedBase) {
  const auto data = make_problem({{"drift", {"-feat[0]"}}});
  const auto x = CadlagPath(1, {0.0, 0.3, 0.3, 1.0}, {0.0, 1.0, 2.0, 0.0});
  const auto phi = solve_flow(data, 0.5, x, OpenLoopControl::constant(0), 0.01);
  const auto path = phi.path();
  for (double t : {0.0, 0.2, 0.3, 0.45, 0.5}) EXPECT_DOUBLE_EQ(path.eval(t)[0], x.eval(t)[0]);
  EXPECT_TRUE(path.jump_times() == std::vector<double>{0.3});
}

TEST(Flow, NodesReplayOneStep) {
  const auto data = make_problem({{"drift", {"sin(feat[0]) + t"}}});
  const auto phi = solve_flow(data, 0.0, CadlagPath::constant({0.4}, 1.0), OpenLoopControl::constant(0), 0.1);
  std::vector<double> next(phi.n_feat);
  for (std::size_t k = 0; k + 1 < phi.node_count(); ++k) {
    flow_step(data, phi.times[k], phi.times[k + 1] - phi.times[k], phi.step_control[k], phi.feat(k), next);
    EXPECT_EQ(next[0], phi.feat(k + 1)[0]);
  }
}

TEST(Hazard, ConstantIntensity) {
  const auto data = make_problem({{"intensity", "0.7"}});
  const auto phi = solve_flow(data, 0.25, CadlagPath::constant({0.0}, 1.0), OpenLoopControl::constant(0), 0.1);
  EXPECT_EQ(integrated_hazard(data, phi, 0.25, 0.25), 0.0);
  EXPECT_NEAR(integrated_hazard(data, phi, 0.25, 0.8), 0.7 * 0.55, 1e-15);
  const auto sd = survival_and_discount(data, phi, 0.25, 0.8);
  EXPECT_NEAR(sd.F, std::exp(-0.7 * 0.55), 1e-15);
  EXPECT_EQ(survival_and_discount(data, phi, 0.25, 0.25).F, 1.0);
}

TEST(Hazard, LinearIntensityIntegral) {
  const auto data = make_problem({{"intensity", "t"}});
  const auto phi = solve_flow(data, 0.0, CadlagPath::constant({0.0}, 1.0), OpenLoopControl::constant(0), 0.1);
  EXPECT_NEAR(integrated_hazard(data, phi, 0.0, 1.0), 0.5, 1e-8);
  EXPECT_NEAR(integrated_hazard(data, phi, 0.0, 0.55), 0.55 * 0.55 / 2.0, 1e-12);
}

TEST(Hazard, ZeroIntensityNeverJumps) {
  const auto data = make_problem({{"intensity", "0"}});
  const auto phi = solve_flow(data, 0.0, CadlagPath::constant({0.0}, 1.0), OpenLoopControl::constant(0), 0.1);
  EXPECT_EQ(survival_and_discount(data, phi, 0.0, 1.0).F, 1.0);
  for (double u : {1e-9, 0.3, 0.999}) EXPECT_FALSE(sample_next_jump(data, phi, 0.0, u).has_value());
}

TEST(Hazard, ExponentialInverse) {
  const double c = 1.7;
  const auto data = make_problem({{"intensity", "1.7"}, {"constants", {{"Clam", 2.0}}}});
  const auto phi = solve_flow(data, 0.1, CadlagPath::constant({0.0}, 1.0), OpenLoopControl::constant(0), 0.1);
  for (double tau : {0.0001, 0.05, 0.33, 0.8999}) {
    const auto t = sample_next_jump(data, phi, 0.1, std::exp(-c * tau));
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(*t, 0.1 + tau, 1e-10) << tau;
  }
  EXPECT_FALSE(sample_next_jump(data, phi, 0.1, std::exp(-c * 0.95)).has_value());
}

TEST(Hazard, MeanInterJumpTime) {
  const auto data = make_problem({{"intensity", "2"}, {"constants", {{"Clam", 2.0}}}, {"horizon", 40.0}});
  const auto phi = solve_flow(data, 0.0, CadlagPath::constant({0.0}, 40.0), OpenLoopControl::constant(0), 0.5);
  RandomStream rng(8);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto t = sample_next_jump(phi, rng.uniform_open());
    ASSERT_TRUE(t.has_value());  // P(no jump by 40) = e^-80
    sum += *t;
  }
  // Exponential(2): mean 0.5, sd 0.5.
  EXPECT_NEAR(sum / n, 0.5, 3.0 * 0.5 / std::sqrt(double(n)));
}

TEST(Hazard, StepInversionProperty) {
  RandomStream rng(2);
  for (int i = 0; i < 500; ++i) {
    const double h = rng.uniform(1e-3, 0.5), l0 = rng.uniform(0.0, 3.0), l1 = rng.uniform(0.0, 3.0);
    const double total = h * (l0 + l1) / 2.0;
    const double target = rng.uniform(0.0, total);
    const double tau = invert_step_hazard(h, l0, l1, target);
    const double cum = tau * l0 + (l1 - l0) * tau * tau / (2.0 * h);
    EXPECT_GE(cum, target - 1e-12);
    EXPECT_LE(tau, h);
    const double before = std::max(0.0, tau - 2e-12);
    EXPECT_LE(before * l0 + (l1 - l0) * before * before / (2.0 * h), target + 1e-12);
  }
}

}  // namespace
}  // namespace pdp
