#include "pdp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdp/error.hpp"

namespace pdp {

TimeGrid TimeGrid::with_step(double T, double dt) {
  if (!(T > 0.0)) throw InputError("time grid needs a positive horizon");
  if (!(dt > 0.0)) throw InputError("time step must be positive");
  const double m = std::ceil(T / dt - 1e-9);
  return {T, static_cast<std::size_t>(std::max(1.0, m))};
}

std::size_t TimeGrid::index_after(double t) const {
  if (t >= T) return M;
  if (t < 0.0) return 0;
  auto k = static_cast<std::size_t>(std::floor(t / T * static_cast<double>(M)));
  while (k < M && at(k) <= t) ++k;
  while (k > 0 && at(k - 1) > t) --k;
  return k;
}

std::size_t OpenLoopControl::at(double t) const {
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  return labels[static_cast<std::size_t>(it - breakpoints.begin())];
}

double OpenLoopControl::next_break(double t) const {
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  return it == breakpoints.end() ? std::numeric_limits<double>::infinity() : *it;
}

OpenLoopControl OpenLoopControl::from(double t) const {
  OpenLoopControl out;
  out.labels = {at(t)};
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (breakpoints[i] > t) {
      out.breakpoints.push_back(breakpoints[i]);
      out.labels.push_back(labels[i + 1]);
    }
  }
  return out;
}

void flow_step(const ProblemData& data, double t, double h, std::size_t control,
               std::span<const double> feat, std::span<double> feat_out) {
  const std::size_t d = data.dimension;
  const std::size_t nf = feat.size();
  // Small fixed buffers cover every realistic lift; fall back to the heap.
  constexpr std::size_t kMax = 16;
  double buf[6 * kMax + 2 * kMax];
  std::vector<double> heap;
  double* mem = buf;
  if (d > kMax || nf > 2 * kMax) {
    heap.resize(6 * d + 2 * nf);
    mem = heap.data();
  }
  double* x0 = mem;
  double* k1 = x0 + d;
  double* k2 = k1 + d;
  double* k3 = k2 + d;
  double* k4 = k3 + d;
  double* xs = k4 + d;
  double* fs = xs + d;
  const std::span<double> fspan(fs, nf);
  const std::span<double> xspan(xs, d);

  data.lift.state(feat, {x0, d});
  drift_at(data, t, feat, control, {k1, d});

  auto stage = [&](double tau, const double* k, double* out) {
    for (std::size_t c = 0; c < d; ++c) xs[c] = x0[c] + tau * k[c];
    std::copy(feat.begin(), feat.end(), fs);
    data.lift.advance(fspan, tau, xspan);
    drift_at(data, t + tau, fspan, control, {out, d});
  };
  stage(h / 2.0, k1, k2);
  stage(h / 2.0, k2, k3);
  stage(h, k3, k4);
  for (std::size_t c = 0; c < d; ++c) {
    xs[c] = x0[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    if (!std::isfinite(xs[c]))
      throw NumericError("flow diverged at t = " + std::to_string(t + h));
  }
  std::copy(feat.begin(), feat.end(), feat_out.begin());
  data.lift.advance(feat_out, h, xspan);
}

namespace {

FlowPath integrate(const ProblemData& data, double s, std::vector<double> feat0,
                   const OpenLoopControl& alpha, const TimeGrid& grid, double end) {
  if (!(s <= end)) throw InputError("flow start after its end");
  if (end > data.horizon) throw HorizonError("flow past the horizon");
  for (std::size_t l : alpha.labels)
    if (l >= data.n_controls()) throw InputError("schedule uses an unknown control");
  FlowPath phi;
  phi.s = s;
  phi.end = end;
  phi.control = alpha;
  phi.dim = data.dimension;
  phi.n_feat = data.lift.size();
  const std::size_t nf = phi.n_feat;

  phi.times.push_back(s);
  phi.features = std::move(feat0);
  phi.cum_hazard.push_back(0.0);
  std::vector<double> next(nf);
  double t = s;
  while (t < end) {
    double t_next = grid.at(grid.index_after(t));
    t_next = std::min({t_next, end, alpha.next_break(t)});
    const double h = t_next - t;
    const std::size_t a = alpha.at(t + h / 2.0);
    const std::span<const double> cur(phi.features.data() + (phi.times.size() - 1) * nf, nf);
    flow_step(data, t, h, a, cur, next);
    const double l0 = intensity_at(data, t, cur, a);
    const double l1 = intensity_at(data, t_next, next, a);
    phi.features.insert(phi.features.end(), next.begin(), next.end());
    phi.times.push_back(t_next);
    phi.step_control.push_back(a);
    phi.lam_left.push_back(l0);
    phi.lam_right.push_back(l1);
    phi.cum_hazard.push_back(phi.cum_hazard.back() + h * (l0 + l1) / 2.0);
    t = t_next;
  }
  phi.states.resize(phi.times.size() * phi.dim);
  for (std::size_t k = 0; k < phi.times.size(); ++k)
    data.lift.state(phi.feat(k), {phi.states.data() + k * phi.dim, phi.dim});
  return phi;
}

}  // namespace

FlowPath solve_flow_features(const ProblemData& data, double s, std::span<const double> feat0,
                             const OpenLoopControl& alpha, const TimeGrid& grid, double end) {
  return integrate(data, s, std::vector<double>(feat0.begin(), feat0.end()), alpha, grid, end);
}

FlowPath solve_flow(const ProblemData& data, double s, const CadlagPath& x,
                    const OpenLoopControl& alpha, const TimeGrid& grid) {
  if (!(s < data.horizon) && s != data.horizon) throw HorizonError("flow start past the horizon");
  FlowPath phi = integrate(data, s, data.lift.of_path(x, s), alpha, grid, data.horizon);
  phi.base = x.truncate(s);
  return phi;
}

FlowPath solve_flow(const ProblemData& data, double s, const CadlagPath& x,
                    const OpenLoopControl& alpha, double dt) {
  return solve_flow(data, s, x, alpha, TimeGrid::with_step(data.horizon, dt));
}

CadlagPath FlowPath::path() const {
  if (base.knot_count() == 0) throw InputError("flow was built without a base path");
  CadlagPath out = base;
  for (std::size_t k = 1; k < times.size(); ++k) out.push_knot(times[k], state(k));
  return out;
}

double integrated_hazard(const FlowPath& phi, double t) {
  if (t < phi.s || t > phi.end) throw HorizonError("hazard query outside the flow interval");
  const auto it = std::upper_bound(phi.times.begin(), phi.times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - phi.times.begin()) - 1;
  if (phi.times[k] == t) return phi.cum_hazard[k];
  const double h = phi.times[k + 1] - phi.times[k];
  const double tau = t - phi.times[k];
  return phi.cum_hazard[k] + tau * phi.lam_left[k] +
         (phi.lam_right[k] - phi.lam_left[k]) * tau * tau / (2.0 * h);
}

double integrated_hazard(const ProblemData&, const FlowPath& phi, double s, double t) {
  if (s != phi.s) throw InputError("hazard start does not match the flow start");
  return integrated_hazard(phi, t);
}

SurvivalDiscount survival_and_discount(const ProblemData& data, const FlowPath& phi, double s,
                                       double t) {
  const double F = std::exp(-integrated_hazard(data, phi, s, t));
  return {F, F};
}

double invert_step_hazard(double h, double l0, double l1, double target) {
  auto cum = [&](double tau) { return tau * l0 + (l1 - l0) * tau * tau / (2.0 * h); };
  double lo = 0.0, hi = h;
  while (hi - lo > kJumpTimeTol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cum(mid) >= target) hi = mid;
    else lo = mid;
  }
  return hi;
}

std::optional<double> sample_next_jump(const FlowPath& phi, double u) {
  const double target = -std::log(u);
  if (phi.cum_hazard.back() < target) return std::nullopt;
  const auto it = std::lower_bound(phi.cum_hazard.begin(), phi.cum_hazard.end(), target);
  const std::size_t k = static_cast<std::size_t>(it - phi.cum_hazard.begin());
  if (k == 0) return phi.s;
  const std::size_t i = k - 1;
  const double h = phi.times[k] - phi.times[i];
  const double tau =
      invert_step_hazard(h, phi.lam_left[i], phi.lam_right[i], target - phi.cum_hazard[i]);
  return std::min(phi.times[i] + tau, phi.times[k]);
}

std::optional<double> sample_next_jump(const ProblemData&, const FlowPath& phi, double s, double u) {
  if (s != phi.s) throw InputError("jump sampling start does not match the flow start");
  return sample_next_jump(phi, u);
}

}  // namespace pdp
