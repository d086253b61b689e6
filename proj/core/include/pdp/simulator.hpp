#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdp/error.hpp"
#include "pdp/flow.hpp"
#include "pdp/model.hpp"
#include "pdp/rng.hpp"

namespace pdp {

/// Non-randomized jump-feedback rule: at stage n (jump time t, features of
/// the stopped path) choose an open-loop schedule for [t, T].
class JumpFeedbackPolicy {
 public:
  virtual ~JumpFeedbackPolicy() = default;
  virtual OpenLoopControl schedule(std::size_t stage, double t,
                                   std::span<const double> feat) const = 0;
  virtual std::string describe() const = 0;
};

/// Uses one control label forever.
class ConstantPolicy final : public JumpFeedbackPolicy {
 public:
  explicit ConstantPolicy(std::size_t label, std::string name = {})
      : label_(label), name_(std::move(name)) {}
  OpenLoopControl schedule(std::size_t, double, std::span<const double>) const override {
    return OpenLoopControl::constant(label_);
  }
  std::string describe() const override { return "const:" + name_; }

 private:
  std::size_t label_;
  std::string name_;
};

/// Stage n uses stages[min(n, size - 1)], restricted to [t, T].
class ScheduleTablePolicy final : public JumpFeedbackPolicy {
 public:
  explicit ScheduleTablePolicy(std::vector<OpenLoopControl> stages);
  OpenLoopControl schedule(std::size_t stage, double t,
                           std::span<const double> feat) const override;
  std::string describe() const override;

 private:
  std::vector<OpenLoopControl> stages_;
};

/// Policy document: {"stages": [{"breakpoints": [...], "labels": [...]}]}.
std::unique_ptr<JumpFeedbackPolicy> policy_from_json(const ProblemData& data,
                                                     const nlohmann::json& doc);

/// (T_n, E_n, alpha_n). Record 0 is (s, x(s), alpha_0). Records after the
/// last one are the cemetery: no further jump before T.
struct StageRecord {
  double time = 0.0;
  Mark mark;
  OpenLoopControl control;
};

struct Trajectory {
  double s = 0.0;
  std::vector<StageRecord> stages;
  CadlagPath path;  // X^{s,x} on [0, T]
  double cost = 0.0;

  std::size_t jump_count() const { return stages.empty() ? 0 : stages.size() - 1; }
  /// Index of the stage active at t in [s, T]; a jump time belongs to the new stage.
  std::size_t stage_at(double t) const;
  /// The control process: alpha_n(t) on (T_n, T_{n+1}], the default label
  /// before s.
  std::size_t control_at(const ProblemData& data, double t) const;
};

struct SimulationOptions {
  double dt = 1e-2;
  /// 0 selects 10 * C_lambda * (T - s) + 50.
  std::size_t stage_cap = 0;
};

/// One controlled run from (s, x). Uses two uniforms per stage from `rng`
/// (jump time, then mark).
Trajectory simulate_trajectory(const ProblemData& data, double s, const CadlagPath& x,
                               const JumpFeedbackPolicy& policy, RandomStream& rng,
                               const SimulationOptions& options = {});

/// Rebuilds the path from the marked sequence by flowing each stage and
/// concatenating marks; equals traj.path knot for knot.
CadlagPath replay_path(const ProblemData& data, const CadlagPath& x, const Trajectory& traj,
                       const SimulationOptions& options = {});

/// Integral of l along the stored path with the recorded controls, plus h.
double pathwise_cost(const ProblemData& data, const Trajectory& traj);

/// Per-stage realized costs; the terminal cost goes to the stage containing T.
std::vector<double> stage_cost_decomposition(const ProblemData& data, const Trajectory& traj);

std::string trajectory_to_csv(const ProblemData& data, const Trajectory& traj,
                              std::string_view comment = {});

struct EstimateOptions {
  SimulationOptions sim;
  std::size_t threads = 1;
  /// Common random numbers: replication streams ignore the policy, so two
  /// policies see the same uniforms.
  bool common_random_numbers = false;
  bool keep_stage_costs = false;
};

struct CostEstimate {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double half_width_95 = 0.0;
  double mean_jumps = 0.0;
  std::vector<double> stage_means;  // when keep_stage_costs
  std::vector<double> costs;        // per replication, in index order
};

/// Raised when some replication hits the stage cap; carries the statistics
/// of the replications that finished.
class SimulationAborted : public NumericError {
 public:
  SimulationAborted(const std::string& what, CostEstimate partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const CostEstimate& partial() const { return partial_; }

 private:
  CostEstimate partial_;
};

/// Seed of replication i: counter-derived from (master, i), so results do
/// not depend on the execution order or thread count.
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t i, const JumpFeedbackPolicy& policy,
                               bool common_random_numbers);

CostEstimate estimate_cost(const ProblemData& data, double s, const CadlagPath& x,
                           const JumpFeedbackPolicy& policy, std::size_t n_rep,
                           std::uint64_t master_seed, const EstimateOptions& options = {});

}  // namespace pdp
