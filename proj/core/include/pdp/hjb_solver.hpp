#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdp/flow.hpp"
#include "pdp/model.hpp"
#include "pdp/simulator.hpp"

namespace pdp {

/// Knots 0 = r_0 < ... < r_N = T with mesh < 1/2 and per-interval
/// contraction bound kappa_k = 1 - exp(-C_lambda (r_k - r_{k-1})).
struct Partition {
  std::vector<double> knots;
  std::vector<double> kappa;
  double mesh = 0.0;
  std::size_t intervals() const { return knots.empty() ? 0 : knots.size() - 1; }
};

/// Uniform partition with mesh min(0.49, -log(1 - kappa_target) / C_lambda)
/// rounded down so that it divides T.
Partition build_partition(const ProblemData& data, double kappa_target);

struct QuadratureSpec {
  std::size_t n_t = 64;      ///< time steps per partition interval
  std::size_t switches = 0;  ///< extra switch points per partition piece
};

struct SolverOptions {
  double kappa_target = 0.5;
  double tol_fix = 1e-6;
  std::size_t max_iterations = 200;
  std::size_t threads = 1;
  std::size_t schedule_cap = 4096;
};

/// A value-like function of (t, lifted features).
using ValueFn = std::function<double(double, std::span<const double>)>;

struct IntervalReport {
  double r0 = 0.0;
  double r1 = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;     ///< last sup-change
  double kappa_bound = 0.0;  ///< 1 - exp(-C_lambda (r1 - r0))
  double kappa_est = 0.0;    ///< largest ratio of successive sup-changes
  std::size_t clamped = 0;   ///< interpolation queries outside the lifted grid
};

/// Tabulated V on (solver time grid x lifted tensor grid), interpolated
/// linearly in time and multilinearly in the features. Queries outside the
/// lifted grid clamp to the boundary and are counted.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(const ProblemData& data, TimeGrid grid, Partition partition, QuadratureSpec quad);

  static ValueFunction constant(const ProblemData& data, const TimeGrid& grid,
                                const Partition& partition, double value);
  static ValueFunction from_function(const ProblemData& data, const TimeGrid& grid,
                                     const Partition& partition, const ValueFn& fn);

  const TimeGrid& grid() const { return grid_; }
  const Partition& partition() const { return partition_; }
  const QuadratureSpec& quadrature() const { return quad_; }
  const std::vector<PathFeature>& features() const { return features_; }
  std::size_t lifted_nodes() const { return lifted_nodes_; }
  std::size_t time_nodes() const { return grid_.M + 1; }
  /// Grid index of partition knot k.
  std::size_t knot_index(std::size_t k) const { return k * quad_.n_t; }

  double& at(std::size_t time_index, std::size_t flat) {
    return table_[time_index * lifted_nodes_ + flat];
  }
  double at(std::size_t time_index, std::size_t flat) const {
    return table_[time_index * lifted_nodes_ + flat];
  }
  std::vector<double>& table() { return table_; }
  const std::vector<double>& table() const { return table_; }
  std::vector<double> node_features(std::size_t flat) const;

  /// Interpolated value; sets *clamped when a feature left its grid.
  double query(double t, std::span<const double> feat, bool* clamped = nullptr) const;
  /// V(s, x) through the lift of x(. ^ s).
  double query(const ProblemData& data, double s, const CadlagPath& x) const;
  /// Multilinear interpolation on time row i.
  double query_row(std::size_t i, std::span<const double> feat, bool* clamped = nullptr) const;
  ValueFn as_function() const;

  std::vector<IntervalReport> intervals;
  double tol_fix = 0.0;

 private:
  TimeGrid grid_;
  Partition partition_;
  QuadratureSpec quad_;
  std::vector<PathFeature> features_;
  std::size_t lifted_nodes_ = 1;
  std::vector<double> table_;
};

/// Corners and weights of the multilinear interpolation at `feat`.
struct Stencil {
  std::vector<std::size_t> index;
  std::vector<double> weight;
  bool clamped = false;
};
Stencil interpolation_stencil(const std::vector<PathFeature>& features,
                              std::span<const double> feat);

/// Piecewise-constant schedules on [s, s_end]: breakpoints at the partition
/// knots inside (s, s_end) plus `switches` grid-snapped points per piece;
/// every labelling of the pieces. Throws BudgetError above `cap` schedules.
std::vector<OpenLoopControl> schedule_grid(const ProblemData& data, const TimeGrid& grid,
                                           std::span<const double> knots, double s, double s_end,
                                           std::size_t switches, std::size_t cap = 4096);

/// Discretized G for one schedule from (s, features) up to s_end.
///
/// Along the flow, chi_{i+1} = chi_i exp(-h (lambda_i + lambda_{i+1}) / 2);
/// the running cost is the trapezoid of chi l; the jump mass chi_i -
/// chi_{i+1} of a step is split between its two nodes in proportion to the
/// intensities there and spread over the kernel atoms. Value =
/// running + chi_end * eta(end features) + sum weight * psi(t, features).
struct OperatorPlan {
  double running = 0.0;
  double chi_end = 1.0;
  std::vector<double> end_feat;
  std::vector<double> jump_time;
  std::vector<double> jump_weight;
  std::vector<double> jump_feat;  // jump-major, lift size per jump
  std::vector<double> jump_mark;  // jump-major, state dimension per jump
  std::size_t n_feat = 1;
  std::size_t dim = 1;

  std::size_t jumps() const { return jump_time.size(); }
  std::span<const double> feat(std::size_t k) const {
    return {jump_feat.data() + k * n_feat, n_feat};
  }
  std::span<const double> mark(std::size_t k) const { return {jump_mark.data() + k * dim, dim}; }
  double evaluate(const ValueFn& psi, const std::function<double(std::span<const double>)>& eta) const;
};

OperatorPlan build_operator_plan(const ProblemData& data, const TimeGrid& grid, double s,
                                 std::span<const double> feat0, const OpenLoopControl& sigma,
                                 double s_end);

struct GEvaluation {
  double value = 0.0;
  std::size_t argmin = 0;
  std::vector<OpenLoopControl> schedules;
  std::vector<double> per_schedule;
};

/// min over the schedule grid of the interval operator with terminal data
/// eta at s_end; with s_end = T and eta = h this is G itself.
GEvaluation evaluate_G(const ProblemData& data, const TimeGrid& grid,
                       std::span<const double> knots, const QuadratureSpec& quad, double s,
                       std::span<const double> feat, double s_end, const ValueFn& psi,
                       const std::function<double(std::span<const double>)>& eta,
                       std::size_t schedule_cap = 4096);

/// [G psi](s, x) over [s, T] with terminal cost h, on psi's grids.
double apply_G(const ProblemData& data, const ValueFunction& psi, double s, const CadlagPath& x,
               const QuadratureSpec& quad);

/// The interval operator G_{s1,s2;eta} on every (time node, lifted node)
/// of the grid slice [i0, i1], precomputed as sparse affine maps so each
/// Picard sweep is a gather and a min.
class IntervalOperator {
 public:
  IntervalOperator(const ProblemData& data, const TimeGrid& grid, std::span<const double> knots,
                   std::size_t i0, std::size_t i1, std::span<const double> eta_row,
                   const QuadratureSpec& quad, std::size_t threads = 1,
                   std::size_t schedule_cap = 4096);

  std::size_t time_nodes() const { return i1_ - i0_ + 1; }
  std::size_t lifted_nodes() const { return lifted_; }
  std::size_t size() const { return time_nodes() * lifted_; }
  std::size_t first_index() const { return i0_; }
  std::size_t last_index() const { return i1_; }
  std::size_t clamped() const { return clamped_; }

  /// out = G psi on the slice (both laid out time-major).
  void apply(std::span<const double> psi, std::span<double> out) const;
  /// Schedule index attaining the minimum at every slice node (lowest on ties).
  std::vector<std::size_t> argmin(std::span<const double> psi) const;
  const std::vector<OpenLoopControl>& schedules(std::size_t j) const { return schedules_[j]; }
  /// Value of one schedule at one slice node.
  double apply_one(std::span<const double> psi, std::size_t node, std::size_t schedule) const;

 private:
  std::size_t i0_, i1_, lifted_;
  std::size_t threads_;
  std::size_t clamped_ = 0;
  std::vector<std::vector<OpenLoopControl>> schedules_;  // per time node
  std::vector<std::size_t> plan_offset_;                 // per node: first plan id
  std::vector<double> constant_;                         // per plan
  std::vector<std::size_t> entry_offset_;                // per plan, plus end
  std::vector<std::uint32_t> entry_index_;
  std::vector<double> entry_weight_;
};

/// Picard iteration of the interval operator from psi0 until the sup-change
/// drops below tol_fix (1 - kappa). Returns the slice; fills `report`.
std::vector<double> solve_interval(const IntervalOperator& op, std::vector<double> psi0,
                                   double kappa_bound, const SolverOptions& options,
                                   IntervalReport& report);

/// Solver time grid (n_t steps per partition interval) and the partition
/// with knots placed exactly on that grid.
struct SolverLayout {
  TimeGrid grid;
  Partition partition;
};
SolverLayout solver_layout(const ProblemData& data, const QuadratureSpec& quad, double kappa_target);

/// Backward value iteration over the partition, V(T, .) = h.
ValueFunction solve_value(const ProblemData& data, const QuadratureSpec& quad,
                          const SolverOptions& options = {});

/// min_a { l + <f, z> - lambda y + sum_e psi(t, x (x)_t e) lambda q_e }.
double hamiltonian_F_psi(const ProblemData& data, const ValueFn& psi, double t,
                         std::span<const double> feat, double y, std::span<const double> z);
double hamiltonian_F_psi(const ProblemData& data, const ValueFunction& psi, double t,
                         const CadlagPath& x, double y, std::span<const double> z);
/// F(t, x, y, z) with the non-local term read from the same value function.
double hamiltonian_F(const ProblemData& data, const ValueFunction& v, double t,
                     const CadlagPath& x, std::span<const double> z);

/// Jump-feedback policy from a solved value function: at every solver time
/// node and lifted node, the schedule on [t, T] attaining the minimum of
/// G V over the schedule grid. Queries use the nearest lifted node and the
/// nearest time node inside the same partition interval.
class ExtractedPolicy final : public JumpFeedbackPolicy {
 public:
  OpenLoopControl schedule(std::size_t stage, double t,
                           std::span<const double> feat) const override;
  std::string describe() const override { return "optimal"; }

  std::size_t lookup_time(double t) const;
  std::size_t lookup_node(std::span<const double> feat) const;
  const OpenLoopControl& table_entry(std::size_t time_index, std::size_t flat) const;

 private:
  friend ExtractedPolicy extract_policy(const ProblemData&, const ValueFunction&,
                                        const QuadratureSpec&, std::size_t);
  TimeGrid grid_;
  std::vector<double> knots_;
  std::size_t n_t_ = 1;
  std::vector<PathFeature> features_;
  std::size_t lifted_ = 1;
  std::vector<std::vector<OpenLoopControl>> schedules_;  // per time node
  std::vector<std::uint32_t> choice_;                     // time-major
};

ExtractedPolicy extract_policy(const ProblemData& data, const ValueFunction& v,
                               const QuadratureSpec& quad, std::size_t threads = 1);

}  // namespace pdp
