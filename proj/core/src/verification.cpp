#include "pdp/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdp/error.hpp"
#include "pdp/expression.hpp"
#include "pdp/flow.hpp"
#include "pdp/parallel.hpp"

namespace pdp {

nlohmann::json report_to_json(const CheckReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["samples"] = r.samples;
  j["worst"] = r.worst;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["seed"] = r.seed;
  j["notes"] = r.notes;
  j["details"] = r.details;
  return j;
}

namespace {

bool on_grid(const Lift& lift, std::span<const double> feat) {
  for (std::size_t i = 0; i < lift.size(); ++i) {
    const auto& g = lift[i].grid;
    if (feat[i] < g.lo || feat[i] > g.hi) return false;
  }
  return true;
}

}  // namespace

CadlagPath sample_model_path(const ProblemData& data, double s, RandomStream& rng,
                             std::size_t max_jumps, double dt) {
  const double T = data.horizon;
  if (!(s >= 0.0 && s <= T)) throw HorizonError("sample time outside [0, T]");
  const auto& lift = data.lift;
  Mark x0(data.dimension, 0.0);
  for (std::size_t c = 0; c < data.dimension; ++c) {
    const auto& g = lift[lift.terminal_index(c)].grid;
    x0[c] = g.node(rng.below(g.n));
  }
  const std::size_t label = rng.below(data.n_controls());
  const auto alpha = OpenLoopControl::constant(label);
  std::vector<double> jumps;
  if (s > 0.0) {
    const auto n = rng.below(max_jumps + 1);
    for (std::size_t i = 0; i < n; ++i) jumps.push_back(rng.uniform(0.0, s));
    std::sort(jumps.begin(), jumps.end());
    jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
    std::erase_if(jumps, [](double t) { return t <= 0.0; });
  }
  const TimeGrid grid = TimeGrid::with_step(T, dt);
  CadlagPath path(data.dimension, {0.0}, x0);
  auto feat = lift.initial(x0);
  double a = 0.0;
  for (std::size_t j = 0; j <= jumps.size(); ++j) {
    const double b = j < jumps.size() ? jumps[j] : s;
    if (b > a) {
      const FlowPath phi = solve_flow_features(data, a, feat, alpha, grid, b);
      for (std::size_t k = 1; k < phi.node_count(); ++k) path.push_knot(phi.times[k], phi.state(k));
      const auto last = phi.feat(phi.node_count() - 1);
      feat.assign(last.begin(), last.end());
    }
    if (j < jumps.size()) {
      // Only marks whose post-jump features stay on the lifted grid; the
      // value function is clamped outside it.
      std::vector<AtomValue> inside;
      double total = 0.0;
      for (auto& atom : kernel_atoms(data, b, feat, label)) {
        auto reset = feat;
        lift.jump(reset, atom.mark);
        if (!on_grid(lift, reset)) continue;
        total += atom.weight;
        inside.push_back(std::move(atom));
      }
      const double u = rng.uniform() * total;
      if (!inside.empty()) {
        std::size_t k = 0;
        double acc = inside[0].weight;
        while (k + 1 < inside.size() && u >= acc) acc += inside[++k].weight;
        path.push_knot(b, inside[k].mark);
        lift.jump(feat, inside[k].mark);
      }
    }
    a = b;
  }
  if (s < T) path.push_knot(T, lift.state(feat));
  return path;
}

double dpp_rhs(const ProblemData& data, const ValueFunction& v, double s, double s1,
               const CadlagPath& x) {
  const auto feat = data.lift.of_path(x, s);
  if (s1 <= s) return v.query(s, feat);
  std::function<double(std::span<const double>)> eta;
  if (s1 >= data.horizon)
    eta = [&](std::span<const double> f) { return terminal_cost_at(data, f); };
  else
    eta = [&](std::span<const double> f) { return v.query(s1, f); };
  return evaluate_G(data, v.grid(), v.partition().knots, v.quadrature(), s, feat,
                    std::min(s1, data.horizon), v.as_function(), eta)
      .value;
}

double dpp_residual(const ProblemData& data, const ValueFunction& v, double s, double s1,
                    const CadlagPath& x) {
  return std::abs(dpp_rhs(data, v, s, s1, x) - v.query(data, s, x));
}

double fixed_point_residual(const ProblemData& data, const ValueFunction& v, double s,
                            const CadlagPath& x) {
  return std::abs(apply_G(data, v, s, x, v.quadrature()) - v.query(data, s, x));
}

namespace {

struct Sample {
  double s = 0.0;
  double s1 = 0.0;
  double value = 0.0;
};

void collect(CheckReport& r, const std::vector<Sample>& samples, bool with_s1) {
  r.details["samples"] = nlohmann::json::array();
  for (const auto& smp : samples) {
    nlohmann::json j{{"s", smp.s}, {"residual", smp.value}};
    if (with_s1) j["s1"] = smp.s1;
    r.details["samples"].push_back(j);
    r.worst = std::max(r.worst, smp.value);
  }
}

std::string budget_note(const ValueFunction& v) {
  double residual = 0.0;
  for (const auto& rep : v.intervals) residual = std::max(residual, rep.residual);
  return "solver budget tol_fix = " + format_real(v.tol_fix) + " (last Picard change " +
         format_real(residual) + "); the remainder of the residual is quadrature error";
}

}  // namespace

CheckReport check_dpp(const ProblemData& data, const ValueFunction& v, double tol,
                      const CheckOptions& options) {
  CheckReport r;
  r.name = "dpp";
  r.samples = options.samples;
  r.tolerance = tol;
  r.seed = options.seed;
  const auto& grid = v.grid();
  std::vector<Sample> out(options.samples);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    RandomStream rng(options.seed, i);
    const std::size_t i0 = rng.below(grid.M);
    const std::size_t i1 = i0 + 1 + rng.below(grid.M - i0);
    const double s = grid.at(i0), s1 = grid.at(i1);
    const CadlagPath x = sample_model_path(data, s, rng);
    out[i] = {s, s1, dpp_residual(data, v, s, s1, x)};
  });
  collect(r, out, true);
  r.notes = budget_note(v);
  r.finish();
  return r;
}

CheckReport check_fixed_point(const ProblemData& data, const ValueFunction& v, double tol,
                              const CheckOptions& options) {
  CheckReport r;
  r.name = "fixedpoint";
  r.samples = options.samples;
  r.tolerance = tol;
  r.seed = options.seed;
  const auto& grid = v.grid();
  std::vector<Sample> out(options.samples);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    RandomStream rng(options.seed, i);
    const double s = grid.at(rng.below(grid.M + 1));
    const CadlagPath x = sample_model_path(data, s, rng);
    out[i] = {s, s, fixed_point_residual(data, v, s, x)};
  });
  collect(r, out, false);
  r.notes = budget_note(v);
  r.finish();
  return r;
}

namespace {

IntervalOperator interval_operator(const ProblemData& data, const ValueFunction& v, std::size_t k,
                                   std::size_t threads) {
  const std::size_t i0 = v.knot_index(k), i1 = v.knot_index(k + 1);
  const std::size_t L = v.lifted_nodes();
  const std::vector<double> eta(v.table().begin() + static_cast<std::ptrdiff_t>(i1 * L),
                                v.table().begin() + static_cast<std::ptrdiff_t>((i1 + 1) * L));
  return IntervalOperator(data, v.grid(), v.partition().knots, i0, i1, eta, v.quadrature(), threads);
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct Contraction {
  double ratio = 0.0;
  double bound = 0.0;
  std::size_t pairs = 0;
};

Contraction contraction_on(const ProblemData& data, const ValueFunction& v, std::size_t k,
                           const CheckOptions& options) {
  if (k >= v.partition().intervals()) throw InputError("interval index out of range");
  const IntervalOperator op = interval_operator(data, v, k, options.threads);
  const double top = data.constants.Cf * (1.0 + data.horizon);
  Contraction c;
  const double mesh = v.partition().knots[k + 1] - v.partition().knots[k];
  c.bound = -std::expm1(-data.constants.Clam * mesh) + 1e-6;
  std::vector<double> p1(op.size()), p2(op.size()), g1(op.size()), g2(op.size());
  for (std::size_t p = 0; p < options.samples; ++p) {
    RandomStream rng(derive_seed(options.seed, k), p);
    for (std::size_t i = 0; i < op.size(); ++i) {
      p1[i] = rng.uniform(0.0, top);
      p2[i] = rng.uniform(0.0, top);
    }
    const double d = sup_diff(p1, p2);
    if (d == 0.0) continue;
    op.apply(p1, g1);
    op.apply(p2, g2);
    c.ratio = std::max(c.ratio, sup_diff(g1, g2) / d);
    ++c.pairs;
  }
  return c;
}

}  // namespace

CheckReport estimate_contraction(const ProblemData& data, const ValueFunction& v, std::size_t interval,
                                 const CheckOptions& options) {
  const Contraction c = contraction_on(data, v, interval, options);
  CheckReport r;
  r.name = "contraction";
  r.samples = c.pairs;
  r.worst = c.ratio;
  r.tolerance = c.bound;
  r.seed = options.seed;
  r.details["interval"] = interval;
  r.finish();
  return r;
}

CheckReport estimate_contraction_all(const ProblemData& data, const ValueFunction& v,
                                     const CheckOptions& options) {
  CheckReport r;
  r.name = "contraction";
  r.seed = options.seed;
  r.tolerance = 0.0;
  r.worst = -std::numeric_limits<double>::infinity();
  r.details["intervals"] = nlohmann::json::array();
  for (std::size_t k = 0; k < v.partition().intervals(); ++k) {
    const Contraction c = contraction_on(data, v, k, options);
    r.samples += c.pairs;
    r.worst = std::max(r.worst, c.ratio - c.bound);
    r.details["intervals"].push_back({{"ratio", c.ratio}, {"bound", c.bound}, {"pairs", c.pairs}});
  }
  r.details["mesh"] = v.partition().mesh;
  r.notes = "worst is the largest measured ratio minus 1 - exp(-C_lambda mesh) - 1e-6";
  r.finish();
  return r;
}

namespace {

double sup_abs(const std::vector<double>& t) {
  double m = 0.0;
  for (double x : t) m = std::max(m, std::abs(x));
  return m;
}

CadlagPath shifted(const CadlagPath& x, std::span<const double> delta) {
  std::vector<double> times, values;
  for (std::size_t k = 0; k < x.knot_count(); ++k) {
    times.push_back(x.knot_time(k));
    const auto v = x.knot_value(k);
    for (std::size_t c = 0; c < v.size(); ++c) values.push_back(v[c] + delta[c]);
  }
  return CadlagPath(x.dimension(), std::move(times), std::move(values));
}

}  // namespace

double default_lipschitz_cap(const ProblemData& data, const ValueFunction& v) {
  const auto& k = data.constants;
  const double T = data.horizon;
  return (1.0 + T) * (1.0 + sup_abs(v.table())) * k.Lf * std::exp((k.Lf + k.Clam) * T);
}

CheckReport estimate_lipschitz(const ProblemData& data, const ValueFunction& v, double cap,
                               const CheckOptions& options) {
  CheckReport r;
  r.name = "lipschitz";
  r.tolerance = cap;
  r.seed = options.seed;
  const auto& grid = v.grid();
  std::vector<double> ratio(options.samples, -1.0);
  std::vector<char> clamped(options.samples, 0);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    RandomStream rng(options.seed, i);
    const double s = grid.at(rng.below(grid.M + 1));
    const CadlagPath x = sample_model_path(data, s, rng);
    std::vector<double> delta(data.dimension);
    for (double& d : delta) d = rng.uniform(-0.5, 0.5);
    const CadlagPath y = shifted(x, delta);
    const double dist = sup_dist(x, y, s);
    if (dist == 0.0) return;
    bool c = false;
    const double vx = v.query(s, data.lift.of_path(x, s), &c);
    const double vy = v.query(s, data.lift.of_path(y, s), &c);
    clamped[i] = c;
    ratio[i] = std::abs(vx - vy) / dist;
  });
  std::size_t n_clamped = 0;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    if (ratio[i] < 0.0) continue;
    ++r.samples;
    r.worst = std::max(r.worst, ratio[i]);
    n_clamped += clamped[i] ? 1 : 0;
  }
  r.details["empirical_lipschitz"] = r.worst;
  r.details["clamped_queries"] = n_clamped;
  r.notes = "empirical constant over pairs x, x + delta with |delta| <= 0.5";
  r.finish();
  return r;
}

CheckReport check_monotone_bracket(const ProblemData& data, const ValueFunction& v,
                                   const BracketOptions& options, std::size_t threads) {
  CheckReport r;
  r.name = "bracket";
  r.tolerance = 1.0;
  r.notes =
      "worst is the largest of: monotonicity violation / slack, width / max(factor kappa^n width_0, 16 eps width_0), "
      "final width / tol, containment violation / tol_fix";
  r.details["intervals"] = nlohmann::json::array();
  const auto& part = v.partition();
  const double T = data.horizon;
  const auto& k = data.constants;
  const std::size_t L = v.lifted_nodes();
  const double tol_fix = std::max(v.tol_fix, 1e-12);
  for (std::size_t kk = part.intervals(); kk-- > 0;) {
    const IntervalOperator op = interval_operator(data, v, kk, threads);
    const std::size_t i0 = v.knot_index(kk), i1 = v.knot_index(kk + 1);
    double eta_sup = 0.0;
    for (std::size_t l = 0; l < L; ++l) eta_sup = std::max(eta_sup, std::abs(v.at(i1, l)));
    const double mesh = part.knots[kk + 1] - part.knots[kk];
    const double seed_hi =
        std::max(k.Cf * (1.0 + T), eta_sup + k.Cf * mesh * std::exp(k.Clam * mesh));
    const double kappa = part.kappa[kk];
    std::vector<double> u(op.size(), 0.0), w(op.size(), seed_hi), un(op.size()), wn(op.size());
    const double width0 = seed_hi;
    double mono = 0.0, width_ratio = 0.0, width = width0;
    std::size_t witness = 0;
    for (std::size_t n = 1; n <= options.n_max; ++n) {
      op.apply(u, un);
      op.apply(w, wn);
      for (std::size_t i = 0; i < op.size(); ++i) {
        const double viol = std::max(u[i] - un[i], wn[i] - w[i]);
        if (viol > mono) {
          mono = viol;
          witness = i;
        }
      }
      u.swap(un);
      w.swap(wn);
      width = sup_diff(u, w);
      // Below a few ulps of the seed the width is rounding noise, not decay.
      const double allowed = std::max(options.width_factor * std::pow(kappa, n) * width0,
                                      16.0 * std::numeric_limits<double>::epsilon() * width0);
      width_ratio = std::max(width_ratio, width / allowed);
    }
    double contain = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
      const double vi = v.table()[i0 * L + i];
      contain = std::max({contain, u[i] - vi, vi - w[i]});
    }
    const double worst = std::max({mono / options.monotone_slack, width_ratio, width / options.tol,
                                   contain / tol_fix});
    r.worst = std::max(r.worst, worst);
    r.samples += op.size();
    nlohmann::json j{{"interval", kk},      {"kappa", kappa},        {"upper_seed", seed_hi},
                     {"final_width", width}, {"width_ratio", width_ratio}, {"monotone_violation", mono},
                     {"containment_violation", contain}};
    if (mono > options.monotone_slack) {
      j["witness_time_index"] = i0 + witness / L;
      j["witness_lifted_node"] = witness % L;
    }
    r.details["intervals"].push_back(j);
  }
  r.finish();
  return r;
}

CheckReport check_minimax_along_characteristics(const ProblemData& data, const ValueFunction& v,
                                                double s0, const CadlagPath& x0,
                                                const std::vector<std::vector<double>>& z_grid,
                                                double tol) {
  CheckReport r;
  r.name = "minimax";
  r.tolerance = tol;
  r.notes = "heuristic existence search over the schedule grid; a miss means not found at this resolution";
  r.details["z"] = nlohmann::json::array();
  const double T = data.horizon;
  if (!(s0 >= 0.0 && s0 < T)) throw HorizonError("minimax start must lie in [0, T)");
  const auto& grid = v.grid();
  const auto schedules =
      schedule_grid(data, grid, v.partition().knots, s0, T, v.quadrature().switches);
  const ValueFn psi = v.as_function();
  const double y0 = v.query(data, s0, x0);
  std::vector<FlowPath> flows;
  for (const auto& sigma : schedules) flows.push_back(solve_flow(data, s0, x0, sigma, grid));
  r.worst = -std::numeric_limits<double>::infinity();
  for (const auto& z : z_grid) {
    if (z.size() != data.dimension) throw InputError("gradient has the wrong dimension");
    double best_super = -std::numeric_limits<double>::infinity();
    double best_sub = best_super;
    for (const auto& phi : flows) {
      double y = y0, super = 0.0, sub = 0.0;
      auto F = [&](std::size_t i, double yy) { return hamiltonian_F_psi(data, psi, phi.times[i], phi.feat(i), yy, z); };
      for (std::size_t i = 0; i + 1 < phi.node_count(); ++i) {
        const double h = phi.times[i + 1] - phi.times[i];
        double dx = 0.0;
        for (std::size_t c = 0; c < data.dimension; ++c) dx += (phi.state(i + 1)[c] - phi.state(i)[c]) * z[c];
        const double f0 = F(i, y);
        const double pred = y + dx - h * f0;
        y = y + dx - 0.5 * h * (f0 + F(i + 1, pred));
        const double vv = v.query(phi.times[i + 1], phi.feat(i + 1));
        super = std::min(super, y - vv);
        sub = std::min(sub, vv - y);
      }
      best_super = std::max(best_super, super);
      best_sub = std::max(best_sub, sub);
    }
    const double miss = std::max(-best_super, -best_sub);
    r.worst = std::max(r.worst, miss);
    r.details["z"].push_back({{"z", z},
                              {"super_margin", best_super},
                              {"sub_margin", best_sub},
                              {"super_found", best_super >= -tol},
                              {"sub_found", best_sub >= -tol}});
    ++r.samples;
  }
  r.details["schedules"] = schedules.size();
  r.finish();
  return r;
}

CheckReport regularity_counterexample() {
  CheckReport r;
  r.name = "regularity";
  r.tolerance = 0.0;
  const double T = 1.0, t0 = 0.5;
  const CadlagPath x0(1, {0.0, t0, t0, T}, {0.0, 0.0, -2.0, -2.0});
  const CadlagPath zero = CadlagPath::constant({0.0}, T);
  // u(t, x) = sup_{r <= t} |x(r)|
  auto u = [&](double t, const CadlagPath& x) { return sup_dist(x, zero, t); };
  const double at_t0 = u(t0, x0.concat(t0, {-1.0}));
  r.worst = std::abs(at_t0 - 1.0);
  r.details["value_at_t0"] = at_t0;
  r.details["value_after_t0"] = nlohmann::json::array();
  for (double eps : {1e-3, 1e-6}) {
    const double val = u(t0 + eps, x0.concat(t0 + eps, {-1.0}));
    r.worst = std::max(r.worst, std::abs(val - 2.0));
    r.details["value_after_t0"].push_back({{"eps", eps}, {"value", val}});
  }
  r.details["metric_gap"] = nlohmann::json::array();
  for (std::size_t n = 2; n <= 1024; n *= 2) {
    const double inv = 1.0 / static_cast<double>(n);
    const double gap = pseudo_metric(t0 + inv, x0, t0, x0);
    r.worst = std::max(r.worst, std::abs(gap - inv));
    r.details["metric_gap"].push_back({{"n", n}, {"distance", gap}});
  }
  r.samples = 3;
  r.finish();
  return r;
}

CheckReport check_flow_bounds(const ProblemData& data, double dt, const CheckOptions& options) {
  CheckReport r;
  r.name = "flow";
  r.tolerance = 1.0 + 1e-6;
  r.seed = options.seed;
  const double T = data.horizon;
  const double Lf = data.constants.Lf;
  const TimeGrid grid = TimeGrid::with_step(T, dt);
  std::vector<double> flow_ratio(options.samples, 0.0), chi_ratio(options.samples, 0.0);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    RandomStream rng(options.seed, i);
    const double s = grid.at(rng.below(grid.M));
    const CadlagPath x = sample_model_path(data, s, rng);
    std::vector<double> times, values;
    for (std::size_t k = 0; k < x.knot_count(); ++k) {
      times.push_back(x.knot_time(k));
      for (double c : x.knot_value(k)) values.push_back(c + rng.uniform(-0.25, 0.25));
    }
    const CadlagPath y(x.dimension(), std::move(times), std::move(values));
    OpenLoopControl alpha;
    alpha.labels = {rng.below(data.n_controls())};
    const std::size_t first = grid.index_after(s);
    for (std::size_t b = 0, nb = rng.below(3); b < nb && first < grid.M; ++b) {
      const double t = grid.at(first + rng.below(grid.M - first));
      if (alpha.breakpoints.empty() || t > alpha.breakpoints.back()) {
        alpha.breakpoints.push_back(t);
        alpha.labels.push_back(rng.below(data.n_controls()));
      }
    }
    const double D = sup_dist(x, y, s);
    if (D == 0.0) return;
    const FlowPath px = solve_flow(data, s, x, alpha, grid);
    const FlowPath py = solve_flow(data, s, y, alpha, grid);
    double run = D;
    for (std::size_t k = 0; k < px.node_count(); ++k) {
      const double tau = px.times[k] - s;
      run = std::max(run, max_norm(px.state(k), py.state(k)));
      flow_ratio[i] = std::max(flow_ratio[i], run / (std::exp(Lf * tau) * D));
      const double dchi = std::abs(std::exp(-px.cum_hazard[k]) - std::exp(-py.cum_hazard[k]));
      if (dchi == 0.0) continue;
      const double bound = Lf * tau * std::exp(Lf * tau) * D;
      chi_ratio[i] = std::max(chi_ratio[i], bound > 0.0 ? dchi / bound : std::numeric_limits<double>::infinity());
    }
  });
  double wf = 0.0, wc = 0.0;
  for (std::size_t i = 0; i < options.samples; ++i) {
    wf = std::max(wf, flow_ratio[i]);
    wc = std::max(wc, chi_ratio[i]);
  }
  r.samples = options.samples;
  r.worst = std::max(wf, wc);
  r.details["flow_ratio"] = wf;
  r.details["discount_ratio"] = wc;
  r.finish();
  return r;
}

namespace {

/// Sum over features of the largest slope between adjacent nodes of one row.
double row_slope(const ValueFunction& v, std::size_t row) {
  const auto& features = v.features();
  const std::size_t L = v.lifted_nodes();
  double total = 0.0;
  std::size_t stride = L;
  for (const auto& f : features) {
    stride /= f.grid.n;
    if (f.grid.n < 2) continue;
    const double spacing = (f.grid.hi - f.grid.lo) / static_cast<double>(f.grid.n - 1);
    double best = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      if ((l / stride) % f.grid.n + 1 == f.grid.n) continue;
      best = std::max(best, std::abs(v.at(row, l + stride) - v.at(row, l)) / spacing);
    }
    total += best;
  }
  return total;
}

}  // namespace

CheckReport check_interval_stability(const ProblemData& data, const ValueFunction& v,
                                     const CheckOptions& options) {
  CheckReport r;
  r.name = "stability";
  r.tolerance = 1.0;
  r.seed = options.seed;
  const auto& k = data.constants;
  const double T = data.horizon;
  const double vsup = sup_abs(v.table());
  const double Lcheck =
      std::exp(k.Lf * T) * std::max({k.Lf, k.Lf * k.Cf, k.Lf * vsup, k.Cf, k.Clam * k.LQ, k.Clam, 1.0});
  const auto& part = v.partition();
  const auto& grid = v.grid();
  std::vector<double> ratio(options.samples, -1.0);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    RandomStream rng(options.seed, i);
    const std::size_t kk = rng.below(part.intervals());
    const std::size_t i0 = v.knot_index(kk), i1 = v.knot_index(kk + 1);
    const double s = grid.at(i0 + rng.below(i1 - i0));
    const double s2 = grid.at(i1);
    double c = 0.0;
    for (std::size_t row = i0; row <= i1; ++row) c = std::max(c, row_slope(v, row));
    const double c_eta = row_slope(v, i1);
    const CadlagPath x = sample_model_path(data, s, rng);
    std::vector<double> delta(data.dimension);
    for (double& d : delta) d = rng.uniform(-0.5, 0.5);
    const CadlagPath y = shifted(x, delta);
    const double dist = sup_dist(x, y, s);
    if (dist == 0.0) return;
    auto eta = [&](std::span<const double> f) { return v.query(s2, f); };
    auto G = [&](const CadlagPath& p) {
      return evaluate_G(data, grid, part.knots, v.quadrature(), s, data.lift.of_path(p, s), s2,
                        v.as_function(), eta)
          .value;
    };
    const double measured = std::abs(G(x) - G(y)) / dist;
    const double bound = c_eta * std::exp(k.Lf * T) + 6.0 * Lcheck * (s2 - s) * (1.0 + c) * (1.0 + vsup);
    ratio[i] = measured / bound;
  });
  for (double q : ratio) {
    if (q < 0.0) continue;
    ++r.samples;
    r.worst = std::max(r.worst, q);
  }
  r.details["L_check"] = Lcheck;
  r.notes = "slopes and sup norm are read off the grid; off-grid values may differ";
  r.finish();
  return r;
}

}  // namespace pdp
