#include "pdp/hjb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdp/error.hpp"
#include "pdp/parallel.hpp"

namespace pdp {

Partition build_partition(const ProblemData& data, double kappa_target) {
  if (!(kappa_target > 0.0 && kappa_target < 1.0))
    throw InputError("kappa_target must lie in (0, 1)");
  const double T = data.horizon;
  const double clam = std::max(data.constants.Clam, 1e-12);
  const double delta = std::min(0.49, -std::log1p(-kappa_target) / clam);
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(T / delta - 1e-12)));
  Partition p;
  p.mesh = T / static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k)
    p.knots.push_back(k == n ? T : T * static_cast<double>(k) / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    p.kappa.push_back(-std::expm1(-data.constants.Clam * (p.knots[k + 1] - p.knots[k])));
  return p;
}

// ---------------------------------------------------------------------------
// Interpolation

namespace {

constexpr std::size_t kMaxInlineFeatures = 16;

struct AxisWeights {
  std::size_t lo = 0;
  double w = 0.0;  // weight of lo + 1
  std::size_t stride = 1;
  bool single = true;
};

/// Fills per-axis positions; returns true when some feature was clamped.
bool locate(const std::vector<PathFeature>& features, std::span<const double> feat,
            AxisWeights* axes) {
  bool clamped = false;
  std::size_t stride = 1;
  for (std::size_t i = features.size(); i-- > 0;) {
    const auto& g = features[i].grid;
    AxisWeights& ax = axes[i];
    ax.stride = stride;
    stride *= g.n;
    if (g.n == 1) {
      ax.single = true;
      ax.lo = 0;
      ax.w = 0.0;
      continue;
    }
    ax.single = false;
    double u = (feat[i] - g.lo) / (g.hi - g.lo) * static_cast<double>(g.n - 1);
    const double top = static_cast<double>(g.n - 1);
    if (u < -1e-9 || u > top + 1e-9) clamped = true;
    u = std::clamp(u, 0.0, top);
    const auto lo = std::min(static_cast<std::size_t>(u), g.n - 2);
    ax.lo = lo;
    ax.w = u - static_cast<double>(lo);
  }
  return clamped;
}

/// Calls fn(flat index, weight) for every corner with non-zero weight.
template <typename Fn>
void for_each_corner(const AxisWeights* axes, std::size_t nf, Fn&& fn) {
  std::size_t active[kMaxInlineFeatures];
  std::size_t n_active = 0;
  std::size_t base = 0;
  double base_w = 1.0;
  for (std::size_t i = 0; i < nf; ++i) {
    const auto& ax = axes[i];
    base += ax.lo * ax.stride;
    if (ax.single || ax.w == 0.0) continue;
    if (ax.w == 1.0) {
      base += ax.stride;
      continue;
    }
    active[n_active++] = i;
  }
  const std::size_t corners = std::size_t{1} << n_active;
  for (std::size_t c = 0; c < corners; ++c) {
    std::size_t idx = base;
    double w = base_w;
    for (std::size_t b = 0; b < n_active; ++b) {
      const auto& ax = axes[active[b]];
      if (c >> b & 1U) {
        idx += ax.stride;
        w *= ax.w;
      } else {
        w *= 1.0 - ax.w;
      }
    }
    fn(idx, w);
  }
}

double interpolate(const std::vector<PathFeature>& features, const double* row,
                   std::span<const double> feat, bool* clamped) {
  if (features.size() > kMaxInlineFeatures) throw InputError("too many lifted features");
  AxisWeights axes[kMaxInlineFeatures];
  const bool c = locate(features, feat, axes);
  if (clamped && c) *clamped = true;
  double v = 0.0;
  for_each_corner(axes, features.size(), [&](std::size_t idx, double w) { v += w * row[idx]; });
  return v;
}

}  // namespace

Stencil interpolation_stencil(const std::vector<PathFeature>& features,
                              std::span<const double> feat) {
  if (features.size() > kMaxInlineFeatures) throw InputError("too many lifted features");
  AxisWeights axes[kMaxInlineFeatures];
  Stencil s;
  s.clamped = locate(features, feat, axes);
  for_each_corner(axes, features.size(), [&](std::size_t idx, double w) {
    s.index.push_back(idx);
    s.weight.push_back(w);
  });
  return s;
}

// ---------------------------------------------------------------------------
// ValueFunction

ValueFunction::ValueFunction(const ProblemData& data, TimeGrid grid, Partition partition,
                             QuadratureSpec quad)
    : grid_(grid),
      partition_(std::move(partition)),
      quad_(quad),
      features_(data.lift.features()),
      lifted_nodes_(data.lift.node_count()),
      table_((grid.M + 1) * lifted_nodes_, 0.0) {}

ValueFunction ValueFunction::constant(const ProblemData& data, const TimeGrid& grid,
                                      const Partition& partition, double value) {
  return from_function(data, grid, partition, [value](double, std::span<const double>) { return value; });
}

ValueFunction ValueFunction::from_function(const ProblemData& data, const TimeGrid& grid,
                                           const Partition& partition, const ValueFn& fn) {
  QuadratureSpec quad;
  const std::size_t n = std::max<std::size_t>(1, partition.intervals());
  quad.n_t = grid.M / n;
  ValueFunction v(data, grid, partition, quad);
  for (std::size_t i = 0; i <= grid.M; ++i)
    for (std::size_t l = 0; l < v.lifted_nodes_; ++l) v.at(i, l) = fn(grid.at(i), v.node_features(l));
  return v;
}

std::vector<double> ValueFunction::node_features(std::size_t flat) const {
  std::vector<double> out(features_.size());
  for (std::size_t i = features_.size(); i-- > 0;) {
    const std::size_t n = features_[i].grid.n;
    out[i] = features_[i].grid.node(flat % n);
    flat /= n;
  }
  return out;
}

double ValueFunction::query_row(std::size_t i, std::span<const double> feat, bool* clamped) const {
  return interpolate(features_, table_.data() + i * lifted_nodes_, feat, clamped);
}

double ValueFunction::query(double t, std::span<const double> feat, bool* clamped) const {
  if (!(t >= 0.0 && t <= grid_.T)) throw HorizonError("value query outside [0, T]");
  std::size_t k = grid_.index_after(t);  // at(k) > t, or M
  if (k == 0) k = 1;
  const std::size_t i = k - 1;
  const double t0 = grid_.at(i);
  if (t == t0) return query_row(i, feat, clamped);
  if (t >= grid_.T) return query_row(grid_.M, feat, clamped);
  const double w = (t - t0) / (grid_.at(k) - t0);
  return (1.0 - w) * query_row(i, feat, clamped) + w * query_row(k, feat, clamped);
}

double ValueFunction::query(const ProblemData& data, double s, const CadlagPath& x) const {
  return query(s, data.lift.of_path(x, s));
}

ValueFn ValueFunction::as_function() const {
  return [this](double t, std::span<const double> feat) { return query(t, feat); };
}

// ---------------------------------------------------------------------------
// Schedules and plans

std::vector<OpenLoopControl> schedule_grid(const ProblemData& data, const TimeGrid& grid,
                                           std::span<const double> knots, double s, double s_end,
                                           std::size_t switches, std::size_t cap) {
  std::vector<double> cuts{s};
  for (double k : knots)
    if (k > s && k < s_end) cuts.push_back(k);
  cuts.push_back(s_end);
  std::vector<double> breaks;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p], b = cuts[p + 1];
    if (p > 0) breaks.push_back(a);
    for (std::size_t j = 1; j <= switches; ++j) {
      const double target = a + (b - a) * static_cast<double>(j) / static_cast<double>(switches + 1);
      std::size_t idx = grid.index_after(target);
      idx = idx == 0 ? 0 : idx - 1;  // largest node <= target
      const double snapped = grid.at(idx);
      if (snapped > a && snapped < b && (breaks.empty() || snapped > breaks.back()))
        breaks.push_back(snapped);
    }
  }
  const std::size_t slots = breaks.size() + 1;
  const std::size_t na = data.n_controls();
  double count = 1.0;
  for (std::size_t i = 0; i < slots; ++i) count *= static_cast<double>(na);
  if (count > static_cast<double>(cap))
    throw BudgetError("schedule grid would hold " + format_real(count) + " schedules (cap " +
                      std::to_string(cap) + ")");
  const auto total = static_cast<std::size_t>(count);
  std::vector<OpenLoopControl> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    OpenLoopControl sigma;
    sigma.breakpoints = breaks;
    sigma.labels.assign(slots, 0);
    std::size_t c = code;
    for (std::size_t i = slots; i-- > 0;) {
      sigma.labels[i] = c % na;
      c /= na;
    }
    out.push_back(std::move(sigma));
  }
  return out;
}

double OperatorPlan::evaluate(const ValueFn& psi,
                              const std::function<double(std::span<const double>)>& eta) const {
  double v = running + chi_end * eta(end_feat);
  for (std::size_t k = 0; k < jumps(); ++k) v += jump_weight[k] * psi(jump_time[k], feat(k));
  return v;
}

OperatorPlan build_operator_plan(const ProblemData& data, const TimeGrid& grid, double s,
                                 std::span<const double> feat0, const OpenLoopControl& sigma,
                                 double s_end) {
  const FlowPath phi = solve_flow_features(data, s, feat0, sigma, grid, s_end);
  OperatorPlan plan;
  plan.n_feat = phi.n_feat;
  plan.dim = data.dimension;
  std::vector<double> reset(phi.n_feat);
  auto add_jumps = [&](double t, std::span<const double> feat, std::size_t a, double w) {
    if (!(w > 0.0)) return;
    const auto atoms = kernel_atoms_declared(data, t, feat, a);
    for (const auto& atom : atoms) {
      if (atom.weight == 0.0) continue;
      std::copy(feat.begin(), feat.end(), reset.begin());
      data.lift.jump(reset, atom.mark);
      plan.jump_time.push_back(t);
      plan.jump_weight.push_back(w * atom.weight);
      plan.jump_feat.insert(plan.jump_feat.end(), reset.begin(), reset.end());
      plan.jump_mark.insert(plan.jump_mark.end(), atom.mark.begin(), atom.mark.end());
    }
  };
  double chi = 1.0;
  for (std::size_t i = 0; i + 1 < phi.node_count(); ++i) {
    const double t0 = phi.times[i], t1 = phi.times[i + 1];
    const double h = t1 - t0;
    const std::size_t a = phi.step_control[i];
    const double l0 = phi.lam_left[i], l1 = phi.lam_right[i];
    const double c0 = running_cost_at(data, t0, phi.feat(i), a);
    const double c1 = running_cost_at(data, t1, phi.feat(i + 1), a);
    const double chi1 = chi * std::exp(-h * (l0 + l1) / 2.0);
    plan.running += h * (chi * c0 + chi1 * c1) / 2.0;
    const double mass = chi - chi1;
    if (mass > 0.0 && l0 + l1 > 0.0) {
      add_jumps(t0, phi.feat(i), a, mass * l0 / (l0 + l1));
      add_jumps(t1, phi.feat(i + 1), a, mass * l1 / (l0 + l1));
    }
    chi = chi1;
  }
  plan.chi_end = chi;
  const auto last = phi.feat(phi.node_count() - 1);
  plan.end_feat.assign(last.begin(), last.end());
  return plan;
}

GEvaluation evaluate_G(const ProblemData& data, const TimeGrid& grid,
                       std::span<const double> knots, const QuadratureSpec& quad, double s,
                       std::span<const double> feat, double s_end, const ValueFn& psi,
                       const std::function<double(std::span<const double>)>& eta,
                       std::size_t schedule_cap) {
  GEvaluation g;
  g.schedules = schedule_grid(data, grid, knots, s, s_end, quad.switches, schedule_cap);
  g.value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.schedules.size(); ++k) {
    const OperatorPlan plan = build_operator_plan(data, grid, s, feat, g.schedules[k], s_end);
    const double v = plan.evaluate(psi, eta);
    g.per_schedule.push_back(v);
    if (v < g.value) {
      g.value = v;
      g.argmin = k;
    }
  }
  return g;
}

namespace {

std::vector<double> knot_times(const ValueFunction& v) {
  std::vector<double> out;
  for (std::size_t k = 0; k <= v.partition().intervals(); ++k)
    out.push_back(v.grid().at(v.knot_index(k)));
  return out;
}

}  // namespace

double apply_G(const ProblemData& data, const ValueFunction& psi, double s, const CadlagPath& x,
               const QuadratureSpec& quad) {
  if (!(s >= 0.0 && s <= data.horizon)) throw HorizonError("apply_G outside [0, T]");
  const auto feat = data.lift.of_path(x, s);
  const auto knots = knot_times(psi);
  return evaluate_G(data, psi.grid(), knots, quad, s, feat, data.horizon, psi.as_function(),
                    [&](std::span<const double> f) { return terminal_cost_at(data, f); })
      .value;
}

// ---------------------------------------------------------------------------
// Interval operator

namespace {

struct NodePlans {
  std::vector<double> constant;
  std::vector<std::size_t> count;
  std::vector<std::uint32_t> index;
  std::vector<double> weight;
  std::size_t clamped = 0;
};

}  // namespace

IntervalOperator::IntervalOperator(const ProblemData& data, const TimeGrid& grid,
                                   std::span<const double> knots, std::size_t i0, std::size_t i1,
                                   std::span<const double> eta_row, const QuadratureSpec& quad,
                                   std::size_t threads, std::size_t schedule_cap)
    : i0_(i0), i1_(i1), lifted_(data.lift.node_count()), threads_(std::max<std::size_t>(1, threads)) {
  if (!(i0 < i1 && i1 <= grid.M)) throw InputError("interval operator needs i0 < i1 <= M");
  if (eta_row.size() != lifted_) throw InputError("terminal slice has the wrong size");
  const auto& features = data.lift.features();
  const double s_end = grid.at(i1);
  const std::size_t nt = time_nodes();
  schedules_.resize(nt);
  for (std::size_t j = 0; j < nt; ++j)
    schedules_[j] = schedule_grid(data, grid, knots, grid.at(i0 + j), s_end, quad.switches, schedule_cap);

  const std::size_t n_nodes = nt * lifted_;
  if (n_nodes > std::numeric_limits<std::uint32_t>::max())
    throw BudgetError("interval slice too large");
  std::vector<NodePlans> per_node(n_nodes);
  parallel_for(n_nodes, threads_, [&](std::size_t node) {
    const std::size_t j = node / lifted_;
    const std::size_t l = node % lifted_;
    const double s = grid.at(i0 + j);
    const auto feat = data.lift.node(l);
    NodePlans& out = per_node[node];
    std::vector<std::pair<std::uint32_t, double>> entries;
    for (const auto& sigma : schedules_[j]) {
      const OperatorPlan plan = build_operator_plan(data, grid, s, feat, sigma, s_end);
      bool clamped = false;
      const double eta = interpolate(features, eta_row.data(), plan.end_feat, &clamped);
      if (clamped) ++out.clamped;
      out.constant.push_back(plan.running + plan.chi_end * eta);
      entries.clear();
      for (std::size_t k = 0; k < plan.jumps(); ++k) {
        const double t = plan.jump_time[k];
        const std::size_t gi = t >= grid.T ? grid.M : grid.index_after(t) - 1;
        if (grid.at(gi) != t || gi < i0 || gi > i1)
          throw NumericError("jump node off the solver grid");
        const std::size_t row = gi - i0;
        AxisWeights axes[kMaxInlineFeatures];
        if (locate(features, plan.feat(k), axes)) ++out.clamped;
        const double w = plan.jump_weight[k];
        for_each_corner(axes, features.size(), [&](std::size_t idx, double cw) {
          entries.emplace_back(static_cast<std::uint32_t>(row * lifted_ + idx), w * cw);
        });
      }
      std::sort(entries.begin(), entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t n = 0;
      for (std::size_t e = 0; e < entries.size(); ++e) {
        if (n > 0 && out.index.back() == entries[e].first) {
          out.weight.back() += entries[e].second;
          continue;
        }
        out.index.push_back(entries[e].first);
        out.weight.push_back(entries[e].second);
        ++n;
      }
      out.count.push_back(n);
    }
  });

  plan_offset_.reserve(n_nodes + 1);
  entry_offset_.push_back(0);
  for (auto& np : per_node) {
    plan_offset_.push_back(constant_.size());
    std::size_t pos = 0;
    for (std::size_t p = 0; p < np.constant.size(); ++p) {
      constant_.push_back(np.constant[p]);
      entry_index_.insert(entry_index_.end(), np.index.begin() + static_cast<std::ptrdiff_t>(pos),
                          np.index.begin() + static_cast<std::ptrdiff_t>(pos + np.count[p]));
      entry_weight_.insert(entry_weight_.end(), np.weight.begin() + static_cast<std::ptrdiff_t>(pos),
                           np.weight.begin() + static_cast<std::ptrdiff_t>(pos + np.count[p]));
      pos += np.count[p];
      entry_offset_.push_back(entry_index_.size());
    }
    clamped_ += np.clamped;
    np = NodePlans{};
  }
  plan_offset_.push_back(constant_.size());
}

double IntervalOperator::apply_one(std::span<const double> psi, std::size_t node,
                                   std::size_t schedule) const {
  const std::size_t p = plan_offset_[node] + schedule;
  double v = constant_[p];
  for (std::size_t e = entry_offset_[p]; e < entry_offset_[p + 1]; ++e)
    v += entry_weight_[e] * psi[entry_index_[e]];
  return v;
}

void IntervalOperator::apply(std::span<const double> psi, std::span<double> out) const {
  if (psi.size() != size() || out.size() != size()) throw InputError("slice size mismatch");
  parallel_for(size(), threads_, [&](std::size_t node) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = plan_offset_[node + 1] - plan_offset_[node];
    for (std::size_t k = 0; k < n; ++k) best = std::min(best, apply_one(psi, node, k));
    out[node] = best;
  });
}

std::vector<std::size_t> IntervalOperator::argmin(std::span<const double> psi) const {
  std::vector<std::size_t> out(size(), 0);
  parallel_for(size(), threads_, [&](std::size_t node) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = plan_offset_[node + 1] - plan_offset_[node];
    for (std::size_t k = 0; k < n; ++k) {
      const double v = apply_one(psi, node, k);
      if (v < best) {
        best = v;
        out[node] = k;
      }
    }
  });
  return out;
}

std::vector<double> solve_interval(const IntervalOperator& op, std::vector<double> psi0,
                                   double kappa_bound, const SolverOptions& options,
                                   IntervalReport& report) {
  std::vector<double> psi = std::move(psi0), next(op.size());
  if (psi.size() != op.size()) throw InputError("initial slice has the wrong size");
  const double stop = options.tol_fix * (1.0 - kappa_bound);
  double prev = 0.0;
  report.kappa_bound = kappa_bound;
  report.kappa_est = 0.0;
  report.clamped = op.clamped();
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    op.apply(psi, next);
    double diff = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) diff = std::max(diff, std::abs(next[i] - psi[i]));
    psi.swap(next);
    if (it > 1 && prev > 1e-14) report.kappa_est = std::max(report.kappa_est, diff / prev);
    prev = diff;
    report.iterations = it;
    report.residual = diff;
    if (diff <= stop) return psi;
  }
  throw NumericError("value iteration on [" + format_real(report.r0) + ", " +
                     format_real(report.r1) + "] did not converge in " +
                     std::to_string(options.max_iterations) + " iterations (last change " +
                     format_real(report.residual) +
                     "); the declared constants may understate the intensity");
}

SolverLayout solver_layout(const ProblemData& data, const QuadratureSpec& quad, double kappa_target) {
  if (quad.n_t < 2) throw InputError("n_t must be at least 2");
  SolverLayout out;
  out.partition = build_partition(data, kappa_target);
  const std::size_t N = out.partition.intervals();
  out.grid = TimeGrid{data.horizon, N * quad.n_t};
  for (std::size_t k = 0; k <= N; ++k) out.partition.knots[k] = out.grid.at(k * quad.n_t);
  return out;
}

ValueFunction solve_value(const ProblemData& data, const QuadratureSpec& quad,
                          const SolverOptions& options) {
  if (!(options.tol_fix > 0.0)) throw InputError("tol_fix must be positive");
  auto [grid, part] = solver_layout(data, quad, options.kappa_target);
  const std::size_t N = part.intervals();
  ValueFunction v(data, grid, part, quad);
  v.tol_fix = options.tol_fix;
  const std::size_t L = v.lifted_nodes();
  for (std::size_t l = 0; l < L; ++l) v.at(grid.M, l) = terminal_cost_at(data, v.node_features(l));

  const auto knots = part.knots;
  v.intervals.resize(N);
  for (std::size_t k = N; k-- > 0;) {
    const std::size_t i0 = k * quad.n_t, i1 = (k + 1) * quad.n_t;
    const std::vector<double> eta(v.table().begin() + static_cast<std::ptrdiff_t>(i1 * L),
                                  v.table().begin() + static_cast<std::ptrdiff_t>((i1 + 1) * L));
    const IntervalOperator op(data, grid, knots, i0, i1, eta, quad, options.threads,
                              options.schedule_cap);
    IntervalReport& rep = v.intervals[k];
    rep.r0 = knots[k];
    rep.r1 = knots[k + 1];
    const auto slice = solve_interval(op, std::vector<double>(op.size(), 0.0), part.kappa[k], options, rep);
    std::copy(slice.begin(), slice.begin() + static_cast<std::ptrdiff_t>(quad.n_t * L),
              v.table().begin() + static_cast<std::ptrdiff_t>(i0 * L));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Hamiltonians

double hamiltonian_F_psi(const ProblemData& data, const ValueFn& psi, double t,
                         std::span<const double> feat, double y, std::span<const double> z) {
  if (z.size() != data.dimension) throw InputError("gradient has the wrong dimension");
  std::vector<double> f(data.dimension), reset(feat.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < data.n_controls(); ++a) {
    drift_at(data, t, feat, a, f);
    const double lam = intensity_at(data, t, feat, a);
    double v = running_cost_at(data, t, feat, a) - lam * y;
    for (std::size_t c = 0; c < data.dimension; ++c) v += f[c] * z[c];
    if (lam > 0.0) {
      for (const auto& atom : kernel_atoms_declared(data, t, feat, a)) {
        std::copy(feat.begin(), feat.end(), reset.begin());
        data.lift.jump(reset, atom.mark);
        v += psi(t, reset) * lam * atom.weight;
      }
    }
    best = std::min(best, v);
  }
  return best;
}

double hamiltonian_F_psi(const ProblemData& data, const ValueFunction& psi, double t,
                         const CadlagPath& x, double y, std::span<const double> z) {
  return hamiltonian_F_psi(data, psi.as_function(), t, data.lift.of_path(x, t), y, z);
}

double hamiltonian_F(const ProblemData& data, const ValueFunction& v, double t,
                     const CadlagPath& x, std::span<const double> z) {
  const auto feat = data.lift.of_path(x, t);
  return hamiltonian_F_psi(data, v.as_function(), t, feat, v.query(t, feat), z);
}

// ---------------------------------------------------------------------------
// Policy extraction

std::size_t ExtractedPolicy::lookup_time(double t) const {
  std::size_t k = 0;
  while (k + 2 < knots_.size() && knots_[k + 1] <= t) ++k;
  const std::size_t first = k * n_t_;
  const std::size_t last = (k + 1) * n_t_ - 1;
  const double rel = (t - grid_.at(first)) / grid_.step();
  const double r = std::max(0.0, std::round(rel));
  return std::min(last, first + static_cast<std::size_t>(r));
}

std::size_t ExtractedPolicy::lookup_node(std::span<const double> feat) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& g = features_[i].grid;
    std::size_t idx = 0;
    if (g.n > 1) {
      const double u = (feat[i] - g.lo) / (g.hi - g.lo) * static_cast<double>(g.n - 1);
      idx = static_cast<std::size_t>(std::clamp(std::round(u), 0.0, static_cast<double>(g.n - 1)));
    }
    flat = flat * g.n + idx;
  }
  return flat;
}

const OpenLoopControl& ExtractedPolicy::table_entry(std::size_t time_index, std::size_t flat) const {
  return schedules_[time_index][choice_[time_index * lifted_ + flat]];
}

OpenLoopControl ExtractedPolicy::schedule(std::size_t, double t,
                                          std::span<const double> feat) const {
  if (t >= grid_.T) return table_entry(grid_.M - 1, lookup_node(feat)).from(t);
  return table_entry(lookup_time(t), lookup_node(feat)).from(t);
}

ExtractedPolicy extract_policy(const ProblemData& data, const ValueFunction& v,
                               const QuadratureSpec& quad, std::size_t threads) {
  ExtractedPolicy pol;
  pol.grid_ = v.grid();
  pol.knots_ = knot_times(v);
  pol.n_t_ = v.quadrature().n_t;
  pol.features_ = v.features();
  pol.lifted_ = v.lifted_nodes();
  const std::size_t M = v.grid().M;
  pol.schedules_.resize(M);
  for (std::size_t i = 0; i < M; ++i)
    pol.schedules_[i] =
        schedule_grid(data, pol.grid_, pol.knots_, pol.grid_.at(i), data.horizon, quad.switches);
  pol.choice_.assign(M * pol.lifted_, 0);
  const ValueFn psi = v.as_function();
  auto h = [&](std::span<const double> f) { return terminal_cost_at(data, f); };
  parallel_for(M * pol.lifted_, threads, [&](std::size_t node) {
    const std::size_t i = node / pol.lifted_;
    const auto feat = v.node_features(node % pol.lifted_);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pol.schedules_[i].size(); ++k) {
      const OperatorPlan plan =
          build_operator_plan(data, pol.grid_, pol.grid_.at(i), feat, pol.schedules_[i][k], data.horizon);
      const double val = plan.evaluate(psi, h);
      if (val < best) {
        best = val;
        pol.choice_[node] = static_cast<std::uint32_t>(k);
      }
    }
  });
  return pol;
}

}  // namespace pdp
