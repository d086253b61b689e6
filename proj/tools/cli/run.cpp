#include "run.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdp/builtins.hpp"
#include "pdp/discrete_mdp.hpp"
#include "pdp/error.hpp"
#include "pdp/expression.hpp"
#include "pdp/hjb_solver.hpp"
#include "pdp/problem_io.hpp"
#include "pdp/simulator.hpp"
#include "pdp/value_io.hpp"
#include "pdp/verification.hpp"
#include "pdp/version.hpp"

namespace pdp::cli {
namespace {

using nlohmann::json;

/// Name of the module operation in progress, for error messages.
struct Context {
  std::string op = "startup";
};

void log(const std::string& line) { std::cerr << line << '\n'; }

void write_json(const std::string& path, const json& doc) {
  if (!path.empty()) write_text_file(path, doc.dump(2) + "\n");
}

json stamp(const ProblemData* data) {
  json j;
  j["version"] = std::string(version());
  if (data) {
    j["problem"] = data->name;
    j["problem_hash"] = problem_hash(*data);
  }
  return j;
}

ProblemData load(const RunConfig& cfg, Context& ctx) {
  if (cfg.problem.empty()) throw InputError("--problem is required");
  ctx.op = "parse_problem_spec";
  return load_problem(cfg.problem);
}

CadlagPath start_path(const RunConfig& cfg, const ProblemData& data, Context& ctx) {
  ctx.op = "path_from_csv";
  if (!cfg.x_path.empty()) {
    CadlagPath x = path_from_csv(read_text_file(cfg.x_path));
    if (x.dimension() != data.dimension) throw InputError("start path has the wrong dimension");
    if (x.horizon() < cfg.s) throw InputError("start path ends before s");
    return x;
  }
  Mark x0 = cfg.x0.empty() ? Mark(data.dimension, 0.0) : Mark(cfg.x0);
  if (x0.size() != data.dimension) throw InputError("--x0 has the wrong dimension");
  return CadlagPath::constant(x0, data.horizon);
}

ValueFunction obtain_value(const RunConfig& cfg, const ProblemData& data, Context& ctx) {
  if (!cfg.value_path.empty()) {
    ctx.op = "read_value_file";
    return read_value_file(cfg.value_path, data);
  }
  ctx.op = "solve_value";
  SolverOptions opt;
  opt.kappa_target = cfg.kappa;
  opt.tol_fix = cfg.tol;
  opt.threads = cfg.threads;
  log("solving value function (n_t = " + std::to_string(cfg.nt) + ")");
  return solve_value(data, {cfg.nt, cfg.switches}, opt);
}

json interval_json(const IntervalReport& r) {
  return {{"r0", r.r0},
          {"r1", r.r1},
          {"iterations", r.iterations},
          {"residual", r.residual},
          {"kappa_bound", r.kappa_bound},
          {"kappa_est", r.kappa_est},
          {"clamped", r.clamped}};
}

// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& cfg, Context& ctx) {
  const ProblemData data = load(cfg, ctx);
  ctx.op = "canonical_text";
  if (!cfg.out.empty()) write_text_file(cfg.out, canonical_text(data));
  ctx.op = "validate_assumptions";
  const ValidationReport rep = validate_assumptions(data, cfg.samples, cfg.seed);
  json doc = stamp(&data);
  doc["samples"] = rep.samples;
  doc["seed"] = rep.seed;
  doc["items"] = json::array();
  for (const auto& it : rep.items) {
    doc["items"].push_back(
        {{"name", it.name}, {"empirical", it.empirical}, {"declared", it.declared}, {"pass", it.pass}, {"note", it.note}});
    log(std::string(it.pass ? "ok   " : "FAIL ") + it.name + ": empirical " + format_real(it.empirical) +
        " declared " + format_real(it.declared) + (it.note.empty() ? "" : " (" + it.note + ")"));
  }
  doc["pass"] = rep.pass();
  write_json(cfg.report, doc);
  log("problem " + data.name + " hash " + problem_hash(data));
  return rep.pass() ? kOk : kCheckFailed;
}

std::unique_ptr<JumpFeedbackPolicy> make_policy(const RunConfig& cfg, const ProblemData& data,
                                                Context& ctx) {
  const std::string& p = cfg.policy;
  if (p.empty() || p.starts_with("const:")) {
    const std::string label = p.empty() ? data.controls[data.default_control] : p.substr(6);
    return std::make_unique<ConstantPolicy>(data.control_index(label), label);
  }
  if (p == "optimal") {
    const ValueFunction v = obtain_value(cfg, data, ctx);
    ctx.op = "extract_policy";
    return std::make_unique<ExtractedPolicy>(extract_policy(data, v, v.quadrature(), cfg.threads));
  }
  ctx.op = "policy_from_json";
  return policy_from_json(data, json::parse(read_text_file(p)));
}

json estimate_json(const CostEstimate& est) {
  return {{"n", est.n},
          {"mean", est.mean},
          {"sd", est.sd},
          {"half_width_95", est.half_width_95},
          {"mean_jumps", est.mean_jumps}};
}

int cmd_simulate(const RunConfig& cfg, Context& ctx) {
  const ProblemData data = load(cfg, ctx);
  const CadlagPath x = start_path(cfg, data, ctx);
  const auto policy = make_policy(cfg, data, ctx);
  EstimateOptions opt;
  opt.sim.dt = cfg.dt;
  opt.threads = cfg.threads;
  opt.common_random_numbers = cfg.crn;
  json doc = stamp(&data);
  doc["policy"] = policy->describe();
  doc["s"] = cfg.s;
  doc["seed"] = cfg.seed;
  doc["dt"] = cfg.dt;
  doc["common_random_numbers"] = cfg.crn;

  if (!cfg.out.empty()) {
    ctx.op = "simulate_trajectory";
    RandomStream rng(replication_seed(cfg.seed, 0, *policy, cfg.crn));
    const Trajectory traj = simulate_trajectory(data, cfg.s, x, *policy, rng, opt.sim);
    write_text_file(cfg.out, trajectory_to_csv(data, traj,
                                               "problem " + problem_hash(data) + " pdpctl " +
                                                   std::string(version()) + " seed " +
                                                   std::to_string(cfg.seed) + " replication 0"));
  }
  ctx.op = "estimate_cost";
  try {
    const CostEstimate est = estimate_cost(data, cfg.s, x, *policy, cfg.n_rep, cfg.seed, opt);
    doc["estimate"] = estimate_json(est);
    write_json(cfg.stats, doc);
    log("cost " + format_real(est.mean) + " +- " + format_real(est.half_width_95) + " (n = " +
        std::to_string(est.n) + ", mean jumps " + format_real(est.mean_jumps) + ")");
  } catch (const SimulationAborted& e) {
    doc["estimate"] = estimate_json(e.partial());
    doc["aborted"] = e.what();
    write_json(cfg.stats, doc);
    throw;
  }
  return kOk;
}

int cmd_solve(const RunConfig& cfg, Context& ctx) {
  const ProblemData data = load(cfg, ctx);
  RunConfig solve_cfg = cfg;
  solve_cfg.value_path.clear();
  const ValueFunction v = obtain_value(solve_cfg, data, ctx);
  ctx.op = "write_value_file";
  if (!cfg.out.empty()) write_value_file(cfg.out, data, v);
  json doc = stamp(&data);
  doc["kappa_target"] = cfg.kappa;
  doc["tol_fix"] = cfg.tol;
  doc["n_t"] = cfg.nt;
  doc["switches"] = cfg.switches;
  doc["mesh"] = v.partition().mesh;
  doc["time_steps"] = v.grid().M;
  doc["lifted_nodes"] = v.lifted_nodes();
  doc["intervals"] = json::array();
  for (const auto& r : v.intervals) {
    doc["intervals"].push_back(interval_json(r));
    log("interval [" + format_real(r.r0) + ", " + format_real(r.r1) + "]: " + std::to_string(r.iterations) +
        " iterations, residual " + format_real(r.residual) + ", kappa est " + format_real(r.kappa_est) +
        " (bound " + format_real(r.kappa_bound) + ")");
  }
  const auto [lo, hi] = std::minmax_element(v.table().begin(), v.table().end());
  doc["value_min"] = *lo;
  doc["value_max"] = *hi;
  write_json(cfg.report, doc);
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, Context& ctx) {
  const ProblemData data = load(cfg, ctx);
  const CadlagPath x = start_path(cfg, data, ctx);
  const ValueFunction v = obtain_value(cfg, data, ctx);
  ctx.op = "ValueFunction::query";
  bool clamped = false;
  const double value = v.query(cfg.s, data.lift.of_path(x, cfg.s), &clamped);
  json doc = stamp(&data);
  doc["s"] = cfg.s;
  doc["value"] = value;
  doc["clamped"] = clamped;
  log("V(" + format_real(cfg.s) + ", x) = " + format_real(value) + (clamped ? " (clamped)" : ""));
  if (cfg.n_rep > 0 && cfg.policy == "optimal") {
    ctx.op = "extract_policy";
    const ExtractedPolicy pol = extract_policy(data, v, v.quadrature(), cfg.threads);
    EstimateOptions opt;
    opt.sim.dt = cfg.dt;
    opt.threads = cfg.threads;
    opt.common_random_numbers = cfg.crn;
    ctx.op = "estimate_cost";
    const CostEstimate est = estimate_cost(data, cfg.s, x, pol, cfg.n_rep, cfg.seed, opt);
    doc["seed"] = cfg.seed;
    doc["policy_estimate"] = estimate_json(est);
    log("extracted policy cost " + format_real(est.mean) + " +- " + format_real(est.half_width_95));
  }
  write_json(cfg.out, doc);
  return kOk;
}

const std::vector<std::string> kChecks = {"dpp",     "fixedpoint", "contraction", "lipschitz", "bracket",
                                          "minimax", "regularity", "flow",        "stability"};

int cmd_verify(const RunConfig& cfg, Context& ctx) {
  std::vector<std::string> selected;
  if (cfg.check == "all") {
    selected = kChecks;
  } else {
    if (std::find(kChecks.begin(), kChecks.end(), cfg.check) == kChecks.end())
      throw InputError("unknown check '" + cfg.check + "'");
    selected = {cfg.check};
  }
  const bool needs_problem = !(selected.size() == 1 && selected[0] == "regularity");
  std::optional<ProblemData> data;
  std::optional<ValueFunction> v;
  std::optional<CadlagPath> x;
  const bool needs_value = needs_problem && !(selected.size() == 1 && selected[0] == "flow");
  if (needs_problem) {
    data = load(cfg, ctx);
    x = start_path(cfg, *data, ctx);
  }
  if (needs_value) v = obtain_value(cfg, *data, ctx);

  CheckOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  json doc = stamp(data ? &*data : nullptr);
  doc["seed"] = cfg.seed;
  doc["checks"] = json::array();
  bool all_pass = true;
  for (const auto& name : selected) {
    ctx.op = "check " + name;
    CheckReport r;
    if (name == "dpp") {
      r = check_dpp(*data, *v, 5e-3, opt);
    } else if (name == "fixedpoint") {
      r = check_fixed_point(*data, *v, 10.0 * std::max(v->tol_fix, cfg.tol), opt);
    } else if (name == "contraction") {
      r = estimate_contraction_all(*data, *v, opt);
    } else if (name == "lipschitz") {
      r = estimate_lipschitz(*data, *v, default_lipschitz_cap(*data, *v), opt);
    } else if (name == "bracket") {
      r = check_monotone_bracket(*data, *v, {}, cfg.threads);
    } else if (name == "minimax") {
      std::vector<std::vector<double>> zs;
      for (std::size_t c = 0; c < data->dimension; ++c)
        for (double z : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
          std::vector<double> zz(data->dimension, 0.0);
          zz[c] = z;
          if (c == 0 || z != 0.0) zs.push_back(zz);
        }
      r = check_minimax_along_characteristics(*data, *v, cfg.s, *x, zs, 1e-2);
    } else if (name == "regularity") {
      r = regularity_counterexample();
    } else if (name == "flow") {
      r = check_flow_bounds(*data, cfg.dt, opt);
    } else if (name == "stability") {
      r = check_interval_stability(*data, *v, opt);
    }
    log(std::string(r.pass ? "pass " : "FAIL ") + r.name + ": worst " + format_real(r.worst) + " tolerance " +
        format_real(r.tolerance) + " over " + std::to_string(r.samples) + " samples");
    all_pass = all_pass && r.pass;
    doc["checks"].push_back(report_to_json(r));
  }
  doc["pass"] = all_pass;
  write_json(cfg.out, doc);
  return all_pass ? kOk : kCheckFailed;
}

int cmd_mdp(const RunConfig& cfg, Context& ctx) {
  json doc = stamp(nullptr);
  bool ok = true;
  if (!cfg.problem.empty()) {
    const ProblemData data = load(cfg, ctx);
    const CadlagPath x = start_path(cfg, data, ctx);
    ctx.op = "bridge_from_pdp";
    const DiscreteDecisionModel m =
        bridge_from_pdp(data, cfg.s, x, cfg.stage_cap, {cfg.bridge_steps, cfg.switches});
    ctx.op = "optimal_cost";
    const double j = optimal_cost(m, 0);
    doc = stamp(&data);
    doc["bridge"] = {{"states", m.n_states()},
                     {"controls", m.n_controls()},
                     {"stages", m.horizon},
                     {"time_steps", cfg.bridge_steps},
                     {"optimal_cost", j}};
    log("bridge optimal cost " + format_real(j) + " over " + std::to_string(m.n_states()) + " states");
    if (!cfg.value_path.empty()) {
      const ValueFunction v = obtain_value(cfg, data, ctx);
      const double vv = v.query(data, cfg.s, x);
      doc["bridge"]["value"] = vv;
      doc["bridge"]["gap"] = j - vv;
      log("solver value " + format_real(vv) + ", discretization gap " + format_real(j - vv));
    }
    write_json(cfg.out, doc);
    return kOk;
  }

  ctx.op = "load_mdp_file";
  const DiscreteDecisionModel m = load_mdp_file(cfg.model);
  const std::size_t x = cfg.state.empty() ? 0 : m.state_index(cfg.state);
  doc["model"] = cfg.model;
  doc["state"] = m.states[x];
  doc["seed"] = cfg.seed;
  const bool all = cfg.check == "all";
  const std::vector<std::string> known = {"all", "marginal", "cost", "optimal", "sufficiency"};
  if (std::find(known.begin(), known.end(), cfg.check) == known.end())
    throw InputError("unknown mdp check '" + cfg.check + "'");
  HistoryPolicy uniform;
  uniform.rule = [&m](std::size_t, DiscreteDecisionModel::History, DiscreteDecisionModel::History) {
    return std::vector<double>(m.n_controls(), 1.0 / static_cast<double>(m.n_controls()));
  };
  if (all || cfg.check == "marginal") {
    ctx.op = "rollout_marginal";
    std::vector<double> p0(m.n_states(), 0.0);
    p0[x] = 1.0;
    const std::size_t N = cfg.length == 0 ? m.horizon : cfg.length;
    const Marginal r = rollout_marginal(m, uniform, p0, N);
    const bool pass = std::abs(r.total() - 1.0) <= 1e-10;
    doc["marginal"] = {{"length", N}, {"total_mass", r.total()}, {"pass", pass}};
    log(std::string(pass ? "pass " : "FAIL ") + "marginal: total mass " + format_real(r.total()));
    ok = ok && pass;
  }
  if (all || cfg.check == "cost") {
    ctx.op = "policy_cost";
    const double c = policy_cost(m, uniform, x);
    doc["cost"] = {{"uniform_policy", c}};
    log("uniform policy cost " + format_real(c));
  }
  if (all || cfg.check == "optimal") {
    ctx.op = "optimal_cost";
    const double j = optimal_cost(m, x);
    json o{{"optimal_cost", j}};
    try {
      ctx.op = "enumerate_deterministic";
      const EnumerationResult e = enumerate_deterministic(m, x, cfg.threads);
      const bool pass = std::abs(e.best_cost - j) <= 1e-12 || e.best_cost == j;
      o["enumerated_policies"] = e.policies;
      o["enumeration_best"] = e.best_cost;
      o["pass"] = pass;
      ok = ok && pass;
      log(std::string(pass ? "pass " : "FAIL ") + "optimal: backward induction " + format_real(j) +
          ", enumeration of " + std::to_string(e.policies) + " policies " + format_real(e.best_cost));
    } catch (const BudgetError& err) {
      o["enumeration"] = std::string("skipped: ") + err.what();
      log("optimal cost " + format_real(j) + " (enumeration skipped: " + err.what() + ")");
    }
    doc["optimal"] = o;
  }
  if (all || cfg.check == "sufficiency") {
    ctx.op = "check_nonrandomized_sufficiency";
    const SufficiencyReport s = check_nonrandomized_sufficiency(m, x, cfg.samples, cfg.seed);
    doc["sufficiency"] = {{"optimal", s.optimal},
                          {"optimal_policy_cost", s.optimal_policy_cost},
                          {"worst_margin", s.worst_margin},
                          {"samples", s.samples},
                          {"violations", s.violations},
                          {"deterministic_attains", s.deterministic_attains},
                          {"pass", s.pass}};
    log(std::string(s.pass ? "pass " : "FAIL ") + "sufficiency: worst margin " + format_real(s.worst_margin) +
        " over " + std::to_string(s.samples) + " random policies");
    ok = ok && s.pass;
  }
  doc["pass"] = ok;
  write_json(cfg.out, doc);
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int run(const RunConfig& cfg) {
  Context ctx;
  try {
    if (cfg.threads == 0) throw InputError("--threads must be at least 1");
    if (cfg.subcommand == "check") return cmd_check(cfg, ctx);
    if (cfg.subcommand == "simulate") return cmd_simulate(cfg, ctx);
    if (cfg.subcommand == "solve") return cmd_solve(cfg, ctx);
    if (cfg.subcommand == "evaluate") return cmd_evaluate(cfg, ctx);
    if (cfg.subcommand == "verify") return cmd_verify(cfg, ctx);
    if (cfg.subcommand == "mdp") return cmd_mdp(cfg, ctx);
    throw InputError("unknown subcommand '" + cfg.subcommand + "'");
  } catch (const Error& e) {
    log("pdpctl " + cfg.subcommand + ": " + ctx.op + ": " + e.what());
    return e.kind() == ErrorKind::Input ? kInputError : kNumericError;
  } catch (const json::exception& e) {
    log("pdpctl " + cfg.subcommand + ": " + ctx.op + ": " + e.what());
    return kInputError;
  }
}

int run_cli(int argc, char** argv) {
  RunConfig cfg;
  if (const char* env = std::getenv("PDP_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "pdpctl: PDP_SEED is not an unsigned integer\n";
      return kInputError;
    }
  }
  CLI::App app{"Path-dependent piecewise deterministic control toolkit", "pdpctl"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1, 1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--problem", cfg.problem, "problem file or builtin:<name>");
    sub->add_option("--seed", cfg.seed, "master seed (default $PDP_SEED or 0)");
    sub->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto start = [&](CLI::App* sub) {
    sub->add_option("--s", cfg.s, "start time");
    sub->add_option("--x", cfg.x_path, "start path CSV (t,v1..vd,is_jump)");
    sub->add_option("--x0", cfg.x0, "constant start value")->delimiter(',');
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--kappa", cfg.kappa, "target contraction per interval");
    sub->add_option("--tol", cfg.tol, "fixed-point tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--nt", cfg.nt, "time steps per partition interval")->check(CLI::Range(2, 1 << 20));
    sub->add_option("--switches", cfg.switches, "switch points per schedule piece");
  };

  auto* check = app.add_subcommand("check", "validate a problem and echo its canonical form");
  common(check);
  check->add_option("--samples", cfg.samples, "assumption samples");
  check->add_option("--out", cfg.out, "canonical problem echo");
  check->add_option("--report", cfg.report, "validation report (JSON)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo cost of a policy");
  common(simulate);
  start(simulate);
  solver(simulate);
  simulate->add_option("--n-rep", cfg.n_rep, "replications")->check(CLI::PositiveNumber);
  simulate->add_option("--dt", cfg.dt, "flow step")->check(CLI::PositiveNumber);
  simulate->add_option("--policy", cfg.policy, "const:<label>, optimal, or a policy JSON file");
  simulate->add_option("--value", cfg.value_path, "value file for --policy optimal");
  simulate->add_flag("--crn", cfg.crn, "common random numbers across policies");
  simulate->add_option("--out", cfg.out, "trajectory CSV of replication 0");
  simulate->add_option("--stats", cfg.stats, "statistics (JSON)");

  auto* solve = app.add_subcommand("solve", "backward value iteration");
  common(solve);
  solver(solve);
  solve->add_option("--out", cfg.out, "value file");
  solve->add_option("--report", cfg.report, "per-interval report (JSON)");

  auto* evaluate = app.add_subcommand("evaluate", "query a solved value function");
  common(evaluate);
  start(evaluate);
  solver(evaluate);
  evaluate->add_option("--value", cfg.value_path, "value file (solved when absent)");
  evaluate->add_option("--policy", cfg.policy, "'optimal' to also simulate the extracted policy");
  evaluate->add_option("--n-rep", cfg.n_rep, "replications for --policy optimal");
  evaluate->add_option("--dt", cfg.dt, "flow step")->check(CLI::PositiveNumber);
  evaluate->add_flag("--crn", cfg.crn, "common random numbers");
  evaluate->add_option("--out", cfg.out, "result (JSON)");

  auto* verify = app.add_subcommand("verify", "numerical checks of a solved value function");
  common(verify);
  start(verify);
  solver(verify);
  verify->add_option("--check", cfg.check,
                     "dpp|fixedpoint|contraction|lipschitz|bracket|minimax|regularity|flow|stability|all");
  verify->add_option("--samples", cfg.samples, "samples per check");
  verify->add_option("--value", cfg.value_path, "value file (solved when absent)");
  verify->add_option("--dt", cfg.dt, "flow step for the flow check")->check(CLI::PositiveNumber);
  verify->add_option("--out", cfg.out, "report (JSON)");

  auto* mdp = app.add_subcommand("mdp", "finite history-dependent decision models");
  common(mdp);
  start(mdp);
  mdp->add_option("--model", cfg.model, "model file or builtin:<name>");
  mdp->add_option("--check", cfg.check, "marginal|cost|optimal|sufficiency|all");
  mdp->add_option("--state", cfg.state, "initial state name");
  mdp->add_option("--length", cfg.length, "marginal length (default horizon)");
  mdp->add_option("--samples", cfg.samples, "random policies for the sufficiency check");
  mdp->add_option("--stage-cap", cfg.stage_cap, "jump stages of the bridge model");
  mdp->add_option("--bridge-steps", cfg.bridge_steps, "time steps of the bridge model")->check(CLI::PositiveNumber);
  mdp->add_option("--switches", cfg.switches, "schedule switch points of the bridge model");
  mdp->add_option("--value", cfg.value_path, "value file to compare the bridge against");
  mdp->add_option("--out", cfg.out, "report (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  return run(cfg);
}

}  // namespace pdp::cli
