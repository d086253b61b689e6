#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pdp/model.hpp"
#include "pdp/path_space.hpp"

namespace pdp {

/// Uniform global grid 0 = g_0 < ... < g_M = T shared by flows, quadrature
/// and control breakpoints. g_M is exactly T.
struct TimeGrid {
  double T = 1.0;
  std::size_t M = 1;

  static TimeGrid with_step(double T, double dt);
  double at(std::size_t k) const {
    return k >= M ? T : T * static_cast<double>(k) / static_cast<double>(M);
  }
  double step() const { return T / static_cast<double>(M); }
  /// Smallest k with at(k) > t (M when t >= T).
  std::size_t index_after(double t) const;
};

/// Piecewise-constant schedule: labels[0] before breakpoints[0], labels[i]
/// on [breakpoints[i-1], breakpoints[i]).
struct OpenLoopControl {
  std::vector<double> breakpoints;
  std::vector<std::size_t> labels{0};

  static OpenLoopControl constant(std::size_t label) { return {{}, {label}}; }
  std::size_t at(double t) const;
  /// First breakpoint strictly after t, or +inf.
  double next_break(double t) const;
  /// The schedule seen from t on: breakpoints after t, label at t first.
  OpenLoopControl from(double t) const;
  bool operator==(const OpenLoopControl&) const = default;
};

/// One classical RK4 step of the state with features carried alongside.
/// Stage features are the start features advanced to the stage point, so the
/// step reads only information available along the stopped path.
void flow_step(const ProblemData& data, double t, double h, std::size_t control,
               std::span<const double> feat, std::span<double> feat_out);

/// Flow phi^{s,x,alpha} on [s, end] on the nodes of `grid` (plus s, end and
/// control breakpoints).
struct FlowPath {
  CadlagPath base;  // x on [0, s]; empty when built from features only
  double s = 0.0;
  double end = 0.0;
  OpenLoopControl control;
  std::vector<double> times;
  std::vector<double> states;    // node-major, dimension per node
  std::vector<double> features;  // node-major, lift size per node
  std::vector<std::size_t> step_control;
  std::vector<double> lam_left, lam_right;  // intensity at step ends, step control
  std::vector<double> cum_hazard;           // integrated hazard at nodes
  std::size_t dim = 1;
  std::size_t n_feat = 1;

  std::size_t node_count() const { return times.size(); }
  std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, dim}; }
  std::span<const double> feat(std::size_t k) const {
    return {features.data() + k * n_feat, n_feat};
  }
  /// x(. ^ s) followed by the flow nodes; requires a base path.
  CadlagPath path() const;
};

FlowPath solve_flow(const ProblemData& data, double s, const CadlagPath& x,
                    const OpenLoopControl& alpha, const TimeGrid& grid);
FlowPath solve_flow(const ProblemData& data, double s, const CadlagPath& x,
                    const OpenLoopControl& alpha, double dt);
/// Flow from lifted features only (no path storage).
FlowPath solve_flow_features(const ProblemData& data, double s, std::span<const double> feat0,
                             const OpenLoopControl& alpha, const TimeGrid& grid, double end);

/// Trapezoid integral of the intensity along the flow over [s, t], with the
/// intensity interpolated linearly inside a step.
double integrated_hazard(const FlowPath& phi, double t);
double integrated_hazard(const ProblemData& data, const FlowPath& phi, double s, double t);

struct SurvivalDiscount {
  double F = 1.0;
  double chi = 1.0;
};
SurvivalDiscount survival_and_discount(const ProblemData& data, const FlowPath& phi, double s,
                                       double t);

/// Bisection tolerance for the jump time.
inline constexpr double kJumpTimeTol = 1e-12;

/// First t with integrated hazard >= -log u; nullopt when no jump happens
/// before the end of the flow.
std::optional<double> sample_next_jump(const FlowPath& phi, double u);
std::optional<double> sample_next_jump(const ProblemData& data, const FlowPath& phi, double s,
                                       double u);

/// Inverts the quadratic cumulative hazard inside one step:
/// smallest tau in [0, h] with tau*l0 + (l1 - l0) tau^2 / (2h) >= target.
double invert_step_hazard(double h, double l0, double l1, double target);

}  // namespace pdp
