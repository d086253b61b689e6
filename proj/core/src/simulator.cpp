#include "pdp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pdp/parallel.hpp"
#include "pdp/problem_io.hpp"

namespace pdp {

ScheduleTablePolicy::ScheduleTablePolicy(std::vector<OpenLoopControl> stages)
    : stages_(std::move(stages)) {
  if (stages_.empty()) throw InputError("schedule table needs at least one stage");
}

namespace {

void check_schedule(const ProblemData& data, const OpenLoopControl& alpha) {
  if (alpha.labels.size() != alpha.breakpoints.size() + 1)
    throw InputError("schedule needs one more label than breakpoints");
  for (std::size_t l : alpha.labels)
    if (l >= data.n_controls()) throw InputError("policy returned an unknown control");
  for (std::size_t i = 1; i < alpha.breakpoints.size(); ++i)
    if (!(alpha.breakpoints[i] > alpha.breakpoints[i - 1]))
      throw InputError("schedule breakpoints must increase");
}

}  // namespace

OpenLoopControl ScheduleTablePolicy::schedule(std::size_t stage, double t,
                                              std::span<const double>) const {
  return stages_[std::min(stage, stages_.size() - 1)].from(t);
}

std::string ScheduleTablePolicy::describe() const {
  std::string out = "table:";
  for (const auto& st : stages_) {
    out += "[";
    for (std::size_t i = 0; i < st.labels.size(); ++i) {
      if (i) out += "|" + format_real(st.breakpoints[i - 1]) + "|";
      out += std::to_string(st.labels[i]);
    }
    out += "]";
  }
  return out;
}

std::unique_ptr<JumpFeedbackPolicy> policy_from_json(const ProblemData& data,
                                                     const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("stages") || !doc.at("stages").is_array())
    throw InputError("policy document needs a 'stages' array");
  std::vector<OpenLoopControl> stages;
  for (const auto& st : doc.at("stages")) {
    OpenLoopControl alpha;
    alpha.labels.clear();
    if (!st.contains("labels") || !st.at("labels").is_array())
      throw InputError("policy stage needs a 'labels' array");
    for (const auto& l : st.at("labels")) {
      if (!l.is_string()) throw InputError("policy labels must be strings");
      alpha.labels.push_back(data.control_index(l.get<std::string>()));
    }
    if (st.contains("breakpoints"))
      for (const auto& b : st.at("breakpoints")) {
        if (!b.is_number()) throw InputError("policy breakpoints must be numbers");
        alpha.breakpoints.push_back(b.get<double>());
      }
    check_schedule(data, alpha);
    stages.push_back(std::move(alpha));
  }
  return std::make_unique<ScheduleTablePolicy>(std::move(stages));
}

std::size_t Trajectory::stage_at(double t) const {
  const auto it = std::upper_bound(stages.begin(), stages.end(), t,
                                   [](double v, const StageRecord& r) { return v < r.time; });
  return it == stages.begin() ? 0 : static_cast<std::size_t>(it - stages.begin()) - 1;
}

std::size_t Trajectory::control_at(const ProblemData& data, double t) const {
  if (stages.empty() || t < s) return data.default_control;
  if (t == s) return stages.front().control.at(t);
  const auto it = std::lower_bound(stages.begin(), stages.end(), t,
                                   [](const StageRecord& r, double v) { return r.time < v; });
  const std::size_t n = static_cast<std::size_t>(it - stages.begin()) - 1;
  return stages[n].control.at(t);
}

namespace {

std::size_t default_cap(const ProblemData& data, const SimulationOptions& options) {
  if (options.stage_cap > 0) return options.stage_cap;
  return static_cast<std::size_t>(10.0 * data.constants.Clam * data.horizon) + 50;
}

void check_start(const ProblemData& data, double s, const CadlagPath& x) {
  if (!(s >= 0.0 && s <= data.horizon)) throw HorizonError("start time outside [0, T]");
  if (x.horizon() < s) throw HorizonError("initial path does not cover [0, s]");
  if (x.dimension() != data.dimension) throw InputError("initial path has the wrong dimension");
}

}  // namespace

Trajectory simulate_trajectory(const ProblemData& data, double s, const CadlagPath& x,
                               const JumpFeedbackPolicy& policy, RandomStream& rng,
                               const SimulationOptions& options) {
  check_start(data, s, x);
  const double T = data.horizon;
  const TimeGrid grid = TimeGrid::with_step(T, options.dt);
  const std::size_t cap = default_cap(data, options);
  const Lift& lift = data.lift;
  const std::size_t d = data.dimension;

  Trajectory tr;
  tr.s = s;
  std::vector<double> feat = lift.of_path(x, s);
  std::vector<double> next(feat.size()), pre(feat.size());
  Mark xi(d), xn(d), xstar(d);
  tr.path = x.truncate(s);

  OpenLoopControl alpha = policy.schedule(0, s, feat);
  check_schedule(data, alpha);
  tr.stages.push_back({s, lift.state(feat), alpha});

  double cost = 0.0, t = s, hazard = 0.0;
  double target = -std::log(rng.uniform_open());
  double u_mark = rng.uniform();
  while (t < T) {
    const double tn = std::min({grid.at(grid.index_after(t)), T, alpha.next_break(t)});
    const double h = tn - t;
    const std::size_t a = alpha.at(t + h / 2.0);
    flow_step(data, t, h, a, feat, next);
    const double l0 = intensity_at(data, t, feat, a);
    const double l1 = intensity_at(data, tn, next, a);
    const double c0 = running_cost_at(data, t, feat, a);
    const double dh = h * (l0 + l1) / 2.0;
    if (hazard + dh >= target) {
      const double tau = invert_step_hazard(h, l0, l1, target - hazard);
      const double tj = std::max(std::min(t + tau, tn), std::nextafter(t, tn));
      const double hj = tj - t;
      lift.state(feat, xi);
      lift.state(next, xn);
      const double w = hj / h;
      for (std::size_t c = 0; c < d; ++c) xstar[c] = xi[c] + w * (xn[c] - xi[c]);
      pre = feat;
      lift.advance(pre, hj, xstar);
      cost += hj * (c0 + running_cost_at(data, tj, pre, a)) / 2.0;
      tr.path.push_knot(tj, xstar);
      const Mark e = sample_kernel_at(data, tj, pre, a, u_mark);
      tr.path.push_knot(tj, e);
      feat = pre;
      lift.jump(feat, e);
      if (tr.stages.size() > cap) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "simulation exceeded the stage cap of %zu jumps at t = %.17g", cap, tj);
        throw NumericError(buf);
      }
      alpha = policy.schedule(tr.stages.size(), tj, feat);
      check_schedule(data, alpha);
      tr.stages.push_back({tj, e, alpha});
      t = tj;
      hazard = 0.0;
      target = -std::log(rng.uniform_open());
      u_mark = rng.uniform();
      continue;
    }
    cost += h * (c0 + running_cost_at(data, tn, next, a)) / 2.0;
    hazard += dh;
    feat.swap(next);
    lift.state(feat, xn);
    tr.path.push_knot(tn, xn);
    t = tn;
  }
  cost += terminal_cost_at(data, feat);
  tr.cost = cost;
  return tr;
}

CadlagPath replay_path(const ProblemData& data, const CadlagPath& x, const Trajectory& traj,
                       const SimulationOptions& options) {
  const TimeGrid grid = TimeGrid::with_step(data.horizon, options.dt);
  const std::size_t d = data.dimension;
  CadlagPath path = x.truncate(traj.s);
  for (std::size_t n = 0; n < traj.stages.size(); ++n) {
    const bool last = n + 1 == traj.stages.size();
    const double start = traj.stages[n].time;
    const double end = last ? data.horizon : traj.stages[n + 1].time;
    const FlowPath phi = solve_flow(data, start, path, traj.stages[n].control, grid);
    std::size_t k = 1;
    for (; k < phi.node_count() && phi.times[k] < end; ++k) path.push_knot(phi.times[k], phi.state(k));
    if (last) {
      if (k < phi.node_count()) path.push_knot(phi.times[k], phi.state(k));
      continue;
    }
    const double t0 = phi.times[k - 1];
    const double w = (end - t0) / (phi.times[k] - t0);
    Mark xstar(d);
    for (std::size_t c = 0; c < d; ++c)
      xstar[c] = phi.state(k - 1)[c] + w * (phi.state(k)[c] - phi.state(k - 1)[c]);
    path.push_knot(end, xstar);
    path.push_knot(end, traj.stages[n + 1].mark);
  }
  return path;
}

namespace {

/// Walks the stored path after s, calling seg(stage, cost) per segment.
template <typename Fn>
std::vector<double> walk_costs(const ProblemData& data, const Trajectory& traj, Fn&& seg) {
  const CadlagPath& path = traj.path;
  std::vector<double> feat = data.lift.of_path(path, traj.s);
  std::size_t k = 0;
  while (k < path.knot_count() && path.knot_time(k) <= traj.s) ++k;
  double last = traj.s;
  for (; k < path.knot_count(); ++k) {
    const double tk = path.knot_time(k);
    const double h = tk - last;
    if (h == 0.0) {
      data.lift.jump(feat, path.knot_value(k));
      continue;
    }
    const std::size_t n = traj.stage_at(last);
    const std::size_t a = traj.stages[n].control.at(last + h / 2.0);
    const double c0 = running_cost_at(data, last, feat, a);
    data.lift.advance(feat, h, path.knot_value(k));
    const double c1 = running_cost_at(data, tk, feat, a);
    seg(n, h * (c0 + c1) / 2.0);
    last = tk;
  }
  return feat;
}

}  // namespace

double pathwise_cost(const ProblemData& data, const Trajectory& traj) {
  double cost = 0.0;
  const auto feat = walk_costs(data, traj, [&](std::size_t, double c) { cost += c; });
  return cost + terminal_cost_at(data, feat);
}

std::vector<double> stage_cost_decomposition(const ProblemData& data, const Trajectory& traj) {
  std::vector<double> out(std::max<std::size_t>(1, traj.stages.size()), 0.0);
  const auto feat = walk_costs(data, traj, [&](std::size_t n, double c) { out[n] += c; });
  out.back() += terminal_cost_at(data, feat);
  return out;
}

std::string trajectory_to_csv(const ProblemData& data, const Trajectory& traj,
                              std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += "t";
  for (std::size_t i = 0; i < data.dimension; ++i) out += ",v" + std::to_string(i + 1);
  out += ",stage,control_label,is_jump\n";
  const CadlagPath& p = traj.path;
  for (std::size_t k = 0; k < p.knot_count(); ++k) {
    const double t = p.knot_time(k);
    out += format_real(t);
    for (double v : p.knot_value(k)) out += "," + format_real(v);
    std::size_t stage = t < traj.s ? 0 : traj.stage_at(t);
    const bool pre_jump = k + 1 < p.knot_count() && p.is_jump_knot(k + 1);
    if (pre_jump && stage > 0 && traj.stages[stage].time == t) --stage;
    const std::size_t a = traj.control_at(data, t);
    out += "," + std::to_string(stage) + "," + data.controls[a];
    out += p.is_jump_knot(k) ? ",1\n" : ",0\n";
  }
  return out;
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t i,
                               const JumpFeedbackPolicy& policy, bool common_random_numbers) {
  const std::uint64_t salt = common_random_numbers ? 0 : fnv1a64(policy.describe());
  return derive_seed(derive_seed(master, salt), i);
}

namespace {

CostEstimate summarize(const std::vector<double>& costs, const std::vector<double>& jumps,
                       const std::vector<std::vector<double>>& stages,
                       const std::vector<char>& ok, bool keep_stage_costs) {
  CostEstimate est;
  double sum = 0.0, jsum = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!ok[i]) continue;
    ++est.n;
    sum += costs[i];
    jsum += jumps[i];
    est.costs.push_back(costs[i]);
  }
  if (est.n == 0) return est;
  est.mean = sum / static_cast<double>(est.n);
  est.mean_jumps = jsum / static_cast<double>(est.n);
  double ss = 0.0;
  for (double c : est.costs) ss += (c - est.mean) * (c - est.mean);
  est.sd = est.n > 1 ? std::sqrt(ss / static_cast<double>(est.n - 1)) : 0.0;
  est.half_width_95 = 1.96 * est.sd / std::sqrt(static_cast<double>(est.n));
  if (keep_stage_costs) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (!ok[i]) continue;
      if (stages[i].size() > est.stage_means.size()) est.stage_means.resize(stages[i].size(), 0.0);
      for (std::size_t n = 0; n < stages[i].size(); ++n) est.stage_means[n] += stages[i][n];
    }
    for (double& m : est.stage_means) m /= static_cast<double>(est.n);
  }
  return est;
}

}  // namespace

CostEstimate estimate_cost(const ProblemData& data, double s, const CadlagPath& x,
                           const JumpFeedbackPolicy& policy, std::size_t n_rep,
                           std::uint64_t master_seed, const EstimateOptions& options) {
  if (n_rep < 2) throw InputError("estimate_cost needs at least 2 replications");
  check_start(data, s, x);
  std::vector<double> costs(n_rep, 0.0), jumps(n_rep, 0.0);
  std::vector<std::vector<double>> stages(options.keep_stage_costs ? n_rep : 0);
  std::vector<char> ok(n_rep, 0);
  std::vector<std::string> errors(n_rep);
  parallel_for(n_rep, options.threads, [&](std::size_t i) {
    RandomStream rng(replication_seed(master_seed, i, policy, options.common_random_numbers));
    try {
      const Trajectory tr = simulate_trajectory(data, s, x, policy, rng, options.sim);
      costs[i] = tr.cost;
      jumps[i] = static_cast<double>(tr.jump_count());
      if (options.keep_stage_costs) stages[i] = stage_cost_decomposition(data, tr);
      ok[i] = 1;
    } catch (const NumericError& e) {
      errors[i] = e.what();
    }
  });
  CostEstimate est = summarize(costs, jumps, stages, ok, options.keep_stage_costs);
  for (std::size_t i = 0; i < n_rep; ++i) {
    if (ok[i]) continue;
    throw SimulationAborted("replication " + std::to_string(i) + " (seed " +
                                std::to_string(master_seed) + "): " + errors[i] + "; " +
                                std::to_string(est.n) + " of " + std::to_string(n_rep) +
                                " replications finished, partial mean " + format_real(est.mean),
                            std::move(est));
  }
  return est;
}

}  // namespace pdp
