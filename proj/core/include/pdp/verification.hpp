#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdp/hjb_solver.hpp"
#include "pdp/model.hpp"
#include "pdp/rng.hpp"

namespace pdp {

/// Outcome of one numerical check: pass iff worst <= tolerance.
struct CheckReport {
  std::string name;
  std::size_t samples = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
  std::string notes;
  nlohmann::json details = nlohmann::json::object();

  void finish() { pass = worst <= tolerance; }
};

nlohmann::json report_to_json(const CheckReport& report);

/// Path on [0, T] stopped at s, generated by the model itself: start on a
/// lifted-grid node, flow under a random constant control, and up to
/// `max_jumps` jumps at uniform times in (0, s) with marks drawn from the
/// kernel atoms that keep the lifted features on their grids (a jump with
/// no such atom is skipped).
CadlagPath sample_model_path(const ProblemData& data, double s, RandomStream& rng,
                             std::size_t max_jumps = 3, double dt = 1.0 / 64);

/// Right side of the DPP through s1: min over schedules on [s, s1] of the
/// interval operator with psi = V and terminal data V(s1, .).
double dpp_rhs(const ProblemData& data, const ValueFunction& v, double s, double s1,
               const CadlagPath& x);
double dpp_residual(const ProblemData& data, const ValueFunction& v, double s, double s1,
                    const CadlagPath& x);
/// |[G V](s, x) - V(s, x)|.
double fixed_point_residual(const ProblemData& data, const ValueFunction& v, double s,
                            const CadlagPath& x);

struct CheckOptions {
  std::size_t samples = 50;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Samples solver-grid times s < s1 and model paths x.
CheckReport check_dpp(const ProblemData& data, const ValueFunction& v, double tol,
                      const CheckOptions& options = {});
CheckReport check_fixed_point(const ProblemData& data, const ValueFunction& v, double tol,
                              const CheckOptions& options = {});

/// Sup-ratio |G psi1 - G psi2| / |psi1 - psi2| of the interval operator on
/// partition interval k (terminal data V at its right knot) over random
/// pairs with values in [0, C_f (1 + T)]. Bound 1 - exp(-C_lambda mesh) + 1e-6.
CheckReport estimate_contraction(const ProblemData& data, const ValueFunction& v, std::size_t interval,
                                 const CheckOptions& options = {});
/// All intervals; worst ratio minus bound is reported per interval.
CheckReport estimate_contraction_all(const ProblemData& data, const ValueFunction& v,
                                     const CheckOptions& options = {});

/// Default cap for the empirical path-Lipschitz constant of V:
/// (1 + T)(1 + |V|_inf) L_f exp((L_f + C_lambda) T).
double default_lipschitz_cap(const ProblemData& data, const ValueFunction& v);
/// Pairs x, x + delta on [0, s]; ratio |V(s,x) - V(s,x~)| / sup_dist.
CheckReport estimate_lipschitz(const ProblemData& data, const ValueFunction& v, double cap,
                               const CheckOptions& options = {});

struct BracketOptions {
  std::size_t n_max = 20;
  double tol = 1e-4;
  double monotone_slack = 1e-10;
  double width_factor = 1.05;  ///< allowed width <= factor * kappa^n * initial width, floored at 16 ulps of it
};

/// Per interval, backward: u_{n+1} = G u_n from u_0 = 0 and v_{n+1} = G v_n
/// from the constant upper seed max(C_f (1 + T), |eta|_inf + C_f mesh
/// exp(C_lambda mesh)), with eta = V at the right knot. Checks monotonicity,
/// geometric width decay, the final width and that the bracket contains V.
CheckReport check_monotone_bracket(const ProblemData& data, const ValueFunction& v,
                                   const BracketOptions& options = {}, std::size_t threads = 1);

/// Heuristic existence search for characteristic pairs: for every z and
/// every schedule of the grid on [s0, T], x is the flow from x0 and y
/// solves y' = <x', z> - F_V(t, x, y, z) from y(s0) = V(s0, x0). The
/// supersolution direction needs y >= V - tol at all nodes, the
/// subsolution direction y <= V + tol. A miss means "not found at this
/// resolution", not a refutation.
CheckReport check_minimax_along_characteristics(const ProblemData& data, const ValueFunction& v,
                                                double s0, const CadlagPath& x0,
                                                const std::vector<std::vector<double>>& z_grid,
                                                double tol);

/// u(t, x) = sup_{r <= t} |x(r)| with x0 = -2 on [t0, T), t0 = 1/2, T = 1:
/// u(t0, x0 (x)_{t0} -1) = 1, u(t0 + eps, x0 (x)_{t0+eps} -1) = 2 for eps in
/// {1e-3, 1e-6}, and d((t0 + 1/n, x0), (t0, x0)) = 1/n for n = 2, 4, ..., 1024.
CheckReport regularity_counterexample();

/// Sampled flows from x and a perturbed x~ under a random schedule:
/// sup-distance ratio against exp(L_f (t - s)) sup_dist(x, x~, s) and the
/// discount difference against L_f (t - s) exp(L_f (t - s)) sup_dist.
/// Worst is the largest ratio; tolerance 1 + 1e-6.
CheckReport check_flow_bounds(const ProblemData& data, double dt, const CheckOptions& options = {});

/// Measured path-Lipschitz constant of one interval-operator application
/// against c' e^{L_f T} + 6 L (s2 - s)(1 + c)(1 + |psi|_inf), with
/// psi = V, eta = V(s2, .), c and c' their grid slopes and
/// L = e^{L_f T} max{L_f, L_f C_f, L_f |V|_inf, C_f, C_lambda L_Q, C_lambda, 1}.
/// Worst is the largest ratio measured / bound.
CheckReport check_interval_stability(const ProblemData& data, const ValueFunction& v,
                                     const CheckOptions& options = {});

}  // namespace pdp
