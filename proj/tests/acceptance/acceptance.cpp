// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdp/builtins.hpp"
#include "pdp/discrete_mdp.hpp"
#include "pdp/hjb_solver.hpp"
#include "pdp/problem_io.hpp"
#include "pdp/rng.hpp"
#include "pdp/simulator.hpp"
#include "pdp/verification.hpp"
#include "run.hpp"

namespace pdp::acceptance {
namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

/// Largest |V(t_i, node) - exact(t_i)| over the whole table.
double sup_deviation(const ValueFunction& v, const std::function<double(double)>& exact) {
  double worst = 0.0;
  for (std::size_t i = 0; i <= v.grid().M; ++i)
    for (std::size_t l = 0; l < v.lifted_nodes(); ++l)
      worst = std::max(worst, std::abs(v.at(i, l) - exact(v.grid().at(i))));
  return worst;
}

const ValueFunction& benchmark_value() {
  static const ValueFunction v = solve_value(builtin_problem("two_control_markov"), {});
  return v;
}

Outcome constant_fixed_point() {
  const auto data = builtin_problem("constant_terminal");
  const auto start = std::chrono::steady_clock::now();
  const auto v = solve_value(data, {});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double dev = sup_deviation(v, [](double) { return 3.0; });
  return {dev <= 1e-6 && secs <= 10.0, fmt("sup |V - 3| = %.3g (<= 1e-6), %.2f s (<= 10 s)", dev, secs)};
}

Outcome running_cost_identity() {
  const auto data = builtin_problem("unit_running");
  const auto v = solve_value(data, {64, 0});
  const double T = data.horizon;
  const double dev = sup_deviation(v, [T](double t) { return T - t; });
  return {dev <= 1e-4, fmt("sup |V - (T - s)| = %.3g (<= 1e-4) at n_t = 64", dev)};
}

Outcome contraction_bound() {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = benchmark_value();
  const auto r = estimate_contraction_all(data, v, {100, kSeed, 1});
  double mesh = 0.0;
  const auto& knots = v.partition().knots;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) mesh = std::max(mesh, knots[k + 1] - knots[k]);
  return {r.pass && mesh < 0.5,
          fmt("max(ratio - bound) = %.3g (<= 1e-6 slack), mesh %.4f (< 1/2), %zu pairs", r.worst, mesh,
              r.samples)};
}

Outcome dpp_residual() {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_dpp(data, benchmark_value(), 5e-3, {50, kSeed, 1});
  return {r.pass, fmt("worst residual %.3g (<= 5e-3) over %zu samples", r.worst, r.samples)};
}

Outcome solver_simulator_agreement() {
  const auto data = builtin_problem("two_control_markov");
  const auto& v = benchmark_value();
  const double s = 0.25;
  const CadlagPath x = CadlagPath::constant({0.0}, data.horizon);
  const std::size_t n = 200000;
  EstimateOptions opt;
  opt.common_random_numbers = true;
  const double V = v.query(data, s, x);
  const auto sigma = [n](const CostEstimate& e) { return e.sd / std::sqrt(static_cast<double>(n)); };

  const ExtractedPolicy optimal = extract_policy(data, v, v.quadrature());
  const auto est = estimate_cost(data, s, x, optimal, n, kSeed, opt);
  const double sg = sigma(est);
  const bool inside = est.mean >= V - 3.0 * sg && est.mean <= V + 3.0 * sg + 5e-3;

  // Every schedule without switches, fixed as a single-stage table.
  const auto schedules = schedule_grid(data, v.grid(), v.partition().knots, s, data.horizon, 0);
  double margin = std::numeric_limits<double>::infinity();
  double best = margin;
  for (const auto& sched : schedules) {
    const ScheduleTablePolicy policy({sched});
    const auto e = estimate_cost(data, s, x, policy, n, kSeed, opt);
    best = std::min(best, e.mean);
    margin = std::min(margin, e.mean - (V - 3.0 * sigma(e) - 5e-3));
  }
  return {inside && margin >= 0.0,
          fmt("V = %.5f, extracted MC %.5f (3 sigma %.2g), best of %zu schedules %.5f (lower-bound slack %.3g)", V,
              est.mean, 3.0 * sg, schedules.size(), best, margin)};
}

Outcome jump_statistics() {
  const auto data = problem_from_json(nlohmann::json::parse(R"js({
    "name": "constant_rate",
    "dimension": 1,
    "horizon": 1.0,
    "controls": ["a"],
    "default_control": "a",
    "constants": {"Cf": 1.0, "Clam": 2.0, "Lf": 1.0, "LQ": 1.0},
    "lift": [{"kind": "terminal_value", "component": 0, "grid": {"lo": -4.0, "hi": 4.0, "n": 9}}],
    "drift": ["0"],
    "intensity": "2",
    "running_cost": "0",
    "terminal_cost": "0",
    "kernel": {"atoms": [{"mark": ["feat[0] + 1"], "weight": "1"}]}
  })js"));
  const std::size_t n = 100000;
  const ConstantPolicy policy(0, "a");
  const CadlagPath x = CadlagPath::constant({0.0}, 1.0);
  std::vector<double> first;
  double jumps = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng(replication_seed(kSeed, i, policy, false));
    const auto traj = simulate_trajectory(data, 0.0, x, policy, rng);
    jumps += static_cast<double>(traj.jump_count());
    if (traj.jump_count() > 0) first.push_back(traj.stages[1].time);
  }
  const double rn = std::sqrt(static_cast<double>(n));
  const double mean = jumps / static_cast<double>(n);
  const bool mean_ok = mean >= 1.98 * (1.0 - 3.0 / rn) && mean <= 2.02 * (1.0 + 3.0 / rn);

  // Kolmogorov-Smirnov on [0, 1): jumps after 1 are censored.
  std::sort(first.begin(), first.end());
  const auto cdf = [](double t) { return 1.0 - std::exp(-2.0 * t); };
  const double nd = static_cast<double>(n);
  double ks = 0.0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const double F = cdf(first[i]);
    ks = std::max({ks, std::abs(static_cast<double>(i) / nd - F), std::abs(static_cast<double>(i + 1) / nd - F)});
  }
  ks = std::max(ks, std::abs(static_cast<double>(first.size()) / nd - cdf(1.0)));
  const double band = 1.628 / rn;
  return {mean_ok && ks <= band,
          fmt("mean jumps %.4f in [%.4f, %.4f], KS %.4g (<= %.4g)", mean, 1.98 * (1.0 - 3.0 / rn),
              2.02 * (1.0 + 3.0 / rn), ks, band)};
}

Outcome monotone_bracketing() {
  const auto data = builtin_problem("two_control_markov");
  const auto r = check_monotone_bracket(data, benchmark_value());
  double width = 0.0, mono = 0.0;
  for (const auto& j : r.details["intervals"]) {
    width = std::max(width, j["final_width"].get<double>());
    mono = std::max(mono, j["monotone_violation"].get<double>());
  }
  return {r.pass, fmt("worst normalized %.3g (<= 1), monotone violation %.3g, final width %.3g", r.worst, mono,
                      width)};
}

Outcome discrete_exactness() {
  const auto m = parse_mdp(builtin_mdp_source("two_stage"));
  double gap = 0.0;
  for (std::size_t x = 0; x < m.n_states(); ++x)
    gap = std::max(gap, std::abs(optimal_cost(m, x) - enumerate_deterministic(m, x).best_cost));
  RandomStream rng(kSeed);
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const auto pi = random_policy(m, m.horizon, rng);
    for (std::size_t x = 0; x < m.n_states(); ++x)
      margin = std::min(margin, policy_cost(m, pi, x) - optimal_cost(m, x));
  }
  return {gap <= 1e-12 && margin >= -1e-10,
          fmt("|optimal - enumeration| = %.3g (<= 1e-12), min random cost - J* = %.3g (>= -1e-10)", gap, margin)};
}

Outcome flow_bounds() {
  const auto data = builtin_problem("running_max_pathdep");
  const auto r = check_flow_bounds(data, 1e-3, {200, kSeed, 1});
  return {r.pass, fmt("worst ratio to bound %.6f over %zu pairs", r.worst, r.samples)};
}

Outcome regularity() {
  const auto r = regularity_counterexample();
  return {r.pass && r.worst == 0.0,
          "value at t0 " + r.details["value_at_t0"].dump() + ", after t0 " + r.details["value_after_t0"].dump() +
              ", worst deviation " + fmt("%.3g", r.worst)};
}

std::string slurp(const std::string& path) { return read_text_file(path); }

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "pdp_acceptance";
  std::filesystem::create_directories(dir);
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  bool same = true;
  std::string detail;
  for (const std::size_t threads : {1, 4}) {
    const std::string tag = std::to_string(threads);
    cli::RunConfig solve;
    solve.subcommand = "solve";
    solve.problem = "builtin:two_control_markov";
    solve.seed = kSeed;
    solve.threads = threads;
    solve.out = path("value_" + tag + ".bin");
    solve.report = path("solve_" + tag + ".json");
    if (cli::run(solve) != cli::kOk) return {false, "solve failed with " + tag + " threads"};

    cli::RunConfig sim;
    sim.subcommand = "simulate";
    sim.problem = "builtin:two_control_markov";
    sim.s = 0.25;
    sim.policy = "optimal";
    sim.value_path = solve.out;
    sim.n_rep = 20000;
    sim.seed = kSeed;
    sim.threads = threads;
    sim.out = path("trajectory_" + tag + ".csv");
    sim.stats = path("stats_" + tag + ".json");
    if (cli::run(sim) != cli::kOk) return {false, "simulate failed with " + tag + " threads"};
  }
  for (const char* stem : {"value_%s.bin", "solve_%s.json", "trajectory_%s.csv", "stats_%s.json"}) {
    char a[64], b[64];
    std::snprintf(a, sizeof a, stem, "1");
    std::snprintf(b, sizeof b, stem, "4");
    const bool eq = slurp(path(a)) == slurp(path(b));
    same = same && eq;
    if (!detail.empty()) detail += ", ";
    detail += std::string(a) + (eq ? " == " : " != ") + b;
  }
  return {same, detail};
}

struct Criterion {
  const char* title;
  Outcome (*run)();
};

}  // namespace
}  // namespace pdp::acceptance

int main() {
  using namespace pdp::acceptance;
  const Criterion criteria[] = {
      {"constant fixed point", constant_fixed_point},
      {"running-cost identity", running_cost_identity},
      {"contraction bound", contraction_bound},
      {"DPP residual", dpp_residual},
      {"solver-simulator agreement", solver_simulator_agreement},
      {"jump statistics", jump_statistics},
      {"monotone bracketing", monotone_bracketing},
      {"discrete exactness", discrete_exactness},
      {"flow bounds", flow_bounds},
      {"regularity regression", regularity},
      {"determinism across thread counts", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", index, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
