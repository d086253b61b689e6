#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdp/model.hpp"
#include "pdp/rng.hpp"

namespace pdp {

/// Cost marker for infeasible (history, control) pairs. It absorbs under
/// addition and loses every minimization; it is only ever multiplied by a
/// strictly positive probability.
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// History-dependent finite decision model truncated at `horizon` stages.
///
/// At stage k the history is (x_0..x_k, u_0..u_{k-1}); choosing u_k costs
/// g_k(x_0..x_k, u_0..u_k) and the next state is drawn from
/// p_k(. | x_0..x_k, u_0..u_k). Costs vanish from stage `horizon` on.
struct DiscreteDecisionModel {
  using History = std::span<const std::size_t>;
  using KernelFn = std::function<std::vector<double>(std::size_t k, History xs, History us)>;
  using CostFn = std::function<double(std::size_t k, History xs, History us)>;

  std::vector<std::string> states;
  std::vector<std::string> controls;
  std::size_t horizon = 0;
  KernelFn kernel;  ///< xs has k+1 entries, us has k+1 entries
  CostFn cost;      ///< same shapes; only called for k < horizon

  std::size_t n_states() const { return states.size(); }
  std::size_t n_controls() const { return controls.size(); }
  std::size_t state_index(std::string_view name) const;
  std::size_t control_index(std::string_view name) const;
};

/// Randomized history-dependent policy: rule(k, x_0..x_k, u_0..u_{k-1})
/// is a probability row over the controls.
struct HistoryPolicy {
  using RuleFn = std::function<std::vector<double>(std::size_t k, DiscreteDecisionModel::History xs,
                                                   DiscreteDecisionModel::History us)>;
  RuleFn rule;
  bool deterministic = false;
};

struct EnumerationBudget {
  std::size_t max_histories = std::size_t{1} << 22;
  std::size_t max_policies = std::size_t{1} << 20;
};

/// Joint law of (x_0, u_0, ..., x_{N-1}, u_{N-1}), flattened with
/// (x_0, u_0) most significant and x before u within a pair.
struct Marginal {
  std::size_t N = 0;
  std::size_t n_states = 0;
  std::size_t n_controls = 0;
  std::vector<double> mass;
  double at(std::span<const std::size_t> xs, std::span<const std::size_t> us) const;
  double total() const;
};

Marginal rollout_marginal(const DiscreteDecisionModel& model, const HistoryPolicy& policy,
                          std::span<const double> p0, std::size_t N,
                          const EnumerationBudget& budget = {});

/// Expected total cost of `policy` from x_0 = x.
double policy_cost(const DiscreteDecisionModel& model, const HistoryPolicy& policy, std::size_t x,
                   const EnumerationBudget& budget = {});

/// Optimal cost-to-go from the stage-k history (xs: k+1 states, us: k
/// controls) by backward induction.
double tail_optimal_cost(const DiscreteDecisionModel& model, std::size_t k,
                         std::span<const std::size_t> xs, std::span<const std::size_t> us,
                         const EnumerationBudget& budget = {});
double optimal_cost(const DiscreteDecisionModel& model, std::size_t x,
                    const EnumerationBudget& budget = {});

// The policy factories below keep a reference to `model`.

/// Deterministic policy choosing the Bellman argmin (lowest index on ties).
HistoryPolicy optimal_policy(const DiscreteDecisionModel& model, const EnumerationBudget& budget = {});

/// Stage-k decision points are enumerated as (x_0, u_0, ..., x_k) in mixed
/// radix with x_0 most significant; stages are concatenated in order.
std::size_t decision_point_count(const DiscreteDecisionModel& model, std::size_t stages);
std::size_t decision_point(const DiscreteDecisionModel& model, std::size_t k,
                           std::span<const std::size_t> xs, std::span<const std::size_t> us);

/// Deterministic policy from a table of control indices over the decision
/// points of the first `table.size()`-covered stages; control 0 afterwards.
HistoryPolicy table_policy(const DiscreteDecisionModel& model, std::vector<std::size_t> table);
/// Randomized policy with independent uniform-Dirichlet rows on the
/// decision points of the first `stages` stages; control 0 afterwards.
HistoryPolicy random_policy(const DiscreteDecisionModel& model, std::size_t stages, RandomStream& rng);
/// Behavioural form of "follow a with probability alpha, b otherwise",
/// obtained by conditioning on the realized control history.
HistoryPolicy mix_policies(HistoryPolicy a, HistoryPolicy b, double alpha);

struct EnumerationResult {
  double best_cost = kInfeasible;
  std::vector<std::size_t> best_table;
  std::uint64_t policies = 0;
};

/// Minimum of policy_cost over every deterministic table on the first
/// `horizon` stages. Parallel over table indices, reduced in index order.
EnumerationResult enumerate_deterministic(const DiscreteDecisionModel& model, std::size_t x,
                                          std::size_t threads = 1,
                                          const EnumerationBudget& budget = {});

struct SufficiencyReport {
  double optimal = 0.0;
  double optimal_policy_cost = 0.0;  ///< cost of the Bellman argmin policy
  double worst_margin = kInfeasible;  ///< min over samples of cost - optimal
  std::size_t samples = 0;
  std::size_t violations = 0;  ///< samples below optimal - 1e-10
  bool deterministic_attains = false;
  bool pass = false;
};

SufficiencyReport check_nonrandomized_sufficiency(const DiscreteDecisionModel& model, std::size_t x,
                                                  std::size_t n_random_policies, std::uint64_t seed,
                                                  const EnumerationBudget& budget = {});

/// Table-based text format, one directive per line, `#` starts a comment:
///
///   states good bad
///   controls rest work
///   horizon 2
///   kernel 1 good * | rest * : 0.7 0.3
///   cost 0 * | work : 1.5
///   cost 1 bad bad | * * : inf
///
/// A stage-k rule lists k+1 states, `|`, k+1 controls; `*` matches
/// anything and the last matching rule wins. Costs default to 0. Kernel
/// rows are required for transitions into stages below the horizon; an
/// unmatched transition into a later stage keeps the current state.
DiscreteDecisionModel parse_mdp(std::string_view text);
/// Reads a model file; `builtin:<name>` selects a shipped model.
DiscreteDecisionModel load_mdp_file(const std::string& path);

struct BridgeDiscretization {
  std::size_t time_steps = 4;  ///< uniform steps over [0, T]
  std::size_t switches = 0;    ///< schedule switch points per stage
};

/// Finite history-dependent model for the jump chain started from (s, x).
///
/// States are (jump time, mark) pairs on the discretized flow plus a
/// cemetery; controls are indices into the stage schedule grid plus a
/// cemetery control. Transition rows and costs are the discretized
/// operator plans: jump mass goes to the (time, mark) states, survival
/// mass to the cemetery. The last stage charges h at every post-jump state
/// in place of further stages. State 0 is the initial state.
DiscreteDecisionModel bridge_from_pdp(const ProblemData& data, double s, const CadlagPath& x,
                                      std::size_t stage_cap, const BridgeDiscretization& disc,
                                      const EnumerationBudget& budget = {});

}  // namespace pdp
