#include "pdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdp/error.hpp"

namespace pdp {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::TerminalValue: return "terminal_value";
    case FeatureKind::RunningMax: return "running_max";
    case FeatureKind::RunningIntegral: return "running_integral";
  }
  return "?";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "terminal_value") return FeatureKind::TerminalValue;
  if (name == "running_max") return FeatureKind::RunningMax;
  if (name == "running_integral") return FeatureKind::RunningIntegral;
  throw InputError("unknown feature kind '" + std::string(name) + "'");
}

Lift::Lift(std::size_t dimension, std::vector<PathFeature> features)
    : features_(std::move(features)), terminal_(dimension, features_.size()) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.component >= dimension)
      throw InputError("feature " + std::to_string(i) + " refers to component " +
                       std::to_string(f.component) + " of a " + std::to_string(dimension) +
                       "-dimensional state");
    if (f.grid.n == 0) throw InputError("feature grid needs at least one node");
    if (f.grid.n > 1 && !(f.grid.hi > f.grid.lo))
      throw InputError("feature grid needs hi > lo");
    if (f.kind == FeatureKind::TerminalValue) {
      if (terminal_[f.component] != features_.size())
        throw InputError("component " + std::to_string(f.component) +
                         " has more than one terminal_value feature");
      terminal_[f.component] = i;
    }
  }
  for (std::size_t c = 0; c < dimension; ++c)
    if (terminal_[c] == features_.size())
      throw InputError("component " + std::to_string(c) + " has no terminal_value feature");
}

std::vector<double> Lift::initial(std::span<const double> x0) const {
  std::vector<double> feat(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    feat[i] = f.kind == FeatureKind::RunningIntegral ? 0.0 : x0[f.component];
  }
  return feat;
}

Mark Lift::state(std::span<const double> feat) const {
  Mark x(terminal_.size());
  state(feat, x);
  return x;
}

void Lift::state(std::span<const double> feat, std::span<double> out) const {
  for (std::size_t c = 0; c < terminal_.size(); ++c) out[c] = feat[terminal_[c]];
}

void Lift::advance(std::span<double> feat, double h, std::span<const double> x_new) const {
  // Integrals read the old terminal values, so update them first.
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.kind == FeatureKind::RunningIntegral && h != 0.0)
      feat[i] += h * (feat[terminal_[f.component]] + x_new[f.component]) / 2.0;
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.kind == FeatureKind::TerminalValue) feat[i] = x_new[f.component];
    else if (f.kind == FeatureKind::RunningMax) feat[i] = std::max(feat[i], x_new[f.component]);
  }
}

std::vector<double> Lift::of_path(const CadlagPath& x, double t) const {
  if (x.dimension() != dimension()) throw InputError("path dimension does not match the model");
  if (t < 0.0 || t > x.horizon())
    throw HorizonError("feature query outside the path horizon");
  std::vector<double> feat = initial(x.knot_value(0));
  double last = 0.0;
  for (std::size_t k = 1; k < x.knot_count() && x.knot_time(k) <= t; ++k) {
    advance(feat, x.knot_time(k) - last, x.knot_value(k));
    last = x.knot_time(k);
  }
  if (last < t) advance(feat, t - last, x.eval(t));
  return feat;
}

std::size_t Lift::node_count() const {
  std::size_t n = 1;
  for (const auto& f : features_) n *= f.grid.n;
  return n;
}

std::vector<double> Lift::node(std::size_t flat) const {
  std::vector<double> out(features_.size());
  for (std::size_t i = features_.size(); i-- > 0;) {
    const std::size_t n = features_[i].grid.n;
    out[i] = features_[i].grid.node(flat % n);
    flat /= n;
  }
  return out;
}

std::size_t ProblemData::control_index(std::string_view label) const {
  const auto it = std::find(controls.begin(), controls.end(), label);
  if (it == controls.end()) throw InputError("unknown control label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - controls.begin());
}

namespace {

void check_control(const ProblemData& data, std::size_t control) {
  if (control >= data.controls.size())
    throw InputError("control index " + std::to_string(control) + " out of range");
}

}  // namespace

void drift_at(const ProblemData& data, double t, std::span<const double> feat,
              std::size_t control, std::span<double> out) {
  for (std::size_t c = 0; c < data.dimension; ++c) out[c] = data.drift[c].eval(t, feat, control);
}

double intensity_at(const ProblemData& data, double t, std::span<const double> feat,
                    std::size_t control) {
  const double v = data.intensity.eval(t, feat, control);
  if (!(v >= 0.0)) throw NumericError("intensity is negative or not a number at t = " + std::to_string(t));
  return v;
}

double running_cost_at(const ProblemData& data, double t, std::span<const double> feat,
                       std::size_t control) {
  return data.running_cost.eval(t, feat, control);
}

double terminal_cost_at(const ProblemData& data, std::span<const double> feat) {
  return data.terminal_cost.eval(data.horizon, feat, data.default_control);
}

Coefficients evaluate_coefficients(const ProblemData& data, double t, const CadlagPath& x,
                                   std::size_t control) {
  check_control(data, control);
  if (t > data.horizon) throw HorizonError("coefficient query past the horizon");
  const auto feat = data.lift.of_path(x, t);
  Coefficients out;
  out.drift.resize(data.dimension);
  drift_at(data, t, feat, control, out.drift);
  out.intensity = intensity_at(data, t, feat, control);
  out.cost = running_cost_at(data, t, feat, control);
  return out;
}

Coefficients evaluate_coefficients(const ProblemData& data, double t, const CadlagPath& x,
                                   std::string_view control) {
  return evaluate_coefficients(data, t, x, data.control_index(control));
}

std::vector<AtomValue> kernel_atoms_declared(const ProblemData& data, double t,
                                             std::span<const double> feat, std::size_t control) {
  std::vector<AtomValue> atoms;
  atoms.reserve(data.atoms.size());
  const Mark here = data.lift.state(feat);
  double total = 0.0;
  for (std::size_t k = 0; k < data.atoms.size(); ++k) {
    const auto& a = data.atoms[k];
    AtomValue v;
    v.mark.resize(data.dimension);
    for (std::size_t c = 0; c < data.dimension; ++c) v.mark[c] = a.mark[c].eval(t, feat, control);
    v.weight = a.weight.eval(t, feat, control);
    if (!(v.weight >= 0.0))
      throw InputError("kernel atom " + std::to_string(k) + " has negative weight");
    if (v.weight > 0.0 && v.mark == here)
      throw InputError("kernel atom " + std::to_string(k) +
                       " puts mass on the current state (Q(s,x,a,{x(s)}) must be 0)");
    total += v.weight;
    atoms.push_back(std::move(v));
  }
  if (!(total > 0.0)) throw InputError("degenerate kernel: atom weights sum to 0");
  if (!data.normalize_kernel && std::abs(total - 1.0) > 1e-12)
    throw InputError("kernel weights sum to " + format_real(total) + " with normalization off");
  for (auto& a : atoms) a.weight /= total;
  return atoms;
}

std::vector<AtomValue> kernel_atoms(const ProblemData& data, double t,
                                    std::span<const double> feat, std::size_t control) {
  auto atoms = kernel_atoms_declared(data, t, feat, control);
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const AtomValue& a, const AtomValue& b) { return a.mark < b.mark; });
  return atoms;
}

Mark sample_kernel_at(const ProblemData& data, double t, std::span<const double> feat,
                      std::size_t control, double u) {
  const auto atoms = kernel_atoms(data, t, feat, control);
  double cum = 0.0;
  for (const auto& a : atoms) {
    cum += a.weight;
    if (u < cum && a.weight > 0.0) return a.mark;
  }
  // u rounds past the last partial sum: return the last charged atom.
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it)
    if (it->weight > 0.0) return it->mark;
  return atoms.back().mark;
}

Mark sample_kernel(const ProblemData& data, double t, const CadlagPath& x, std::size_t control,
                   double u) {
  check_control(data, control);
  return sample_kernel_at(data, t, data.lift.of_path(x, t), control, u);
}

CadlagPath random_test_path(const ProblemData& data, double t_end, RandomStream& rng,
                            std::size_t max_jumps) {
  const std::size_t d = data.dimension;
  auto draw = [&] {
    Mark v(d);
    for (std::size_t c = 0; c < d; ++c) {
      const auto& g = data.lift[data.lift.terminal_index(c)].grid;
      v[c] = g.n == 1 ? g.lo : rng.uniform(g.lo, g.hi);
    }
    return v;
  };
  CadlagPath path = CadlagPath::constant(draw(), 0.0);
  if (t_end <= 0.0) return path;
  const std::size_t segments = 1 + rng.below(4);
  std::vector<double> cuts;
  for (std::size_t k = 0; k + 1 < segments; ++k) cuts.push_back(rng.uniform(0.0, t_end));
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(t_end);
  std::size_t jumps_left = rng.below(max_jumps + 1);
  double last = 0.0;
  for (double c : cuts) {
    if (c <= last) continue;
    path.push_knot(c, draw());
    if (jumps_left > 0 && c < t_end && rng.uniform() < 0.5) {
      path.push_knot(c, draw());
      --jumps_left;
    }
    last = c;
  }
  return path;
}

double transport_distance(const std::vector<AtomValue>& p, const std::vector<AtomValue>& q) {
  if (p.empty() || q.empty()) return 0.0;
  const std::size_t d = p.front().mark.size();
  if (d == 1) {
    // W1 on the line: integral of |F_p - F_q|.
    std::vector<std::pair<double, double>> events;
    for (const auto& a : p) events.emplace_back(a.mark[0], a.weight);
    for (const auto& a : q) events.emplace_back(a.mark[0], -a.weight);
    std::sort(events.begin(), events.end());
    double cdf = 0.0, w = 0.0;
    for (std::size_t k = 0; k + 1 < events.size(); ++k) {
      cdf += events[k].second;
      w += std::abs(cdf) * (events[k + 1].first - events[k].first);
    }
    return w;
  }
  // Pair atom k with atom k as far as their masses allow; ship the
  // unmatched mass across the largest distance between the supports.
  double cost = 0.0, unmatched = 0.0, diam = 0.0;
  for (std::size_t k = 0; k < std::max(p.size(), q.size()); ++k) {
    const double wp = k < p.size() ? p[k].weight : 0.0;
    const double wq = k < q.size() ? q[k].weight : 0.0;
    if (k < p.size() && k < q.size()) cost += std::min(wp, wq) * max_norm(p[k].mark, q[k].mark);
    unmatched += std::abs(wp - wq);
  }
  for (const auto& a : p)
    for (const auto& b : q) diam = std::max(diam, max_norm(a.mark, b.mark));
  return cost + unmatched / 2.0 * diam;
}

bool ValidationReport::pass() const {
  return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.pass; });
}

ValidationReport validate_assumptions(const ProblemData& data, std::size_t n_samples,
                                      std::uint64_t seed) {
  ValidationReport report;
  report.samples = n_samples;
  report.seed = seed;
  const auto& K = data.constants;
  const double T = data.horizon;
  RandomStream rng(seed, 0);

  double max_lambda = 0.0, min_lambda = 0.0, max_cost_sum = 0.0, min_cost = 0.0;
  double max_growth = 0.0;  // |f| / (1 + sup|x|)
  double lip_coeff = 0.0, lip_h = 0.0, lip_q = 0.0;
  double min_weight = 0.0, max_norm_err = 0.0;
  std::size_t atom_hits = 0, anticipation = 0;
  std::vector<double> fx(data.dimension), fy(data.dimension);

  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = rng.uniform(0.0, T);
    const CadlagPath x = random_test_path(data, T, rng);
    // Every other pair is a small perturbation so local slopes get probed.
    CadlagPath y = random_test_path(data, T, rng);
    if (i % 2 == 1) {
      std::vector<double> times, values;
      const double eps = 1e-3 * (1.0 + rng.uniform());
      for (std::size_t k = 0; k < x.knot_count(); ++k) {
        times.push_back(x.knot_time(k));
        for (double v : x.knot_value(k)) values.push_back(v + eps * (2.0 * rng.uniform() - 1.0));
      }
      y = CadlagPath(x.dimension(), std::move(times), std::move(values));
    }
    const auto fxs = data.lift.of_path(x, t);
    const auto fys = data.lift.of_path(y, t);
    const auto fxT = data.lift.of_path(x, T);
    const auto fyT = data.lift.of_path(y, T);
    const double dist_t = sup_dist(x, y, t);
    const double dist_T = sup_dist(x, y, T);
    double sup_x = 0.0;
    {
      const Mark zero(data.dimension, 0.0);
      sup_x = sup_dist(x, CadlagPath::constant(zero, T), t);
    }
    const auto fstop = data.lift.of_path(x.stop(t), t);
    if (fstop != fxs) ++anticipation;

    const double hx = terminal_cost_at(data, fxT);
    const double hy = terminal_cost_at(data, fyT);
    if (dist_T > 0) lip_h = std::max(lip_h, std::abs(hx - hy) / dist_T);
    min_cost = std::min(min_cost, hx);

    double worst_cost = 0.0;
    for (std::size_t a = 0; a < data.n_controls(); ++a) {
      drift_at(data, t, fxs, a, fx);
      drift_at(data, t, fys, a, fy);
      const double lx = data.intensity.eval(t, fxs, a);
      const double ly = data.intensity.eval(t, fys, a);
      const double cx = running_cost_at(data, t, fxs, a);
      const double cy = running_cost_at(data, t, fys, a);
      max_lambda = std::max(max_lambda, lx);
      min_lambda = std::min(min_lambda, lx);
      min_cost = std::min(min_cost, cx);
      worst_cost = std::max(worst_cost, cx);
      double fnorm = 0.0;
      for (double v : fx) fnorm = std::max(fnorm, std::abs(v));
      max_growth = std::max(max_growth, fnorm / (1.0 + sup_x));
      if (dist_t > 0) {
        const double diff = max_norm(fx, fy) + std::abs(cx - cy) + std::abs(lx - ly);
        lip_coeff = std::max(lip_coeff, diff / dist_t);
      }
      try {
        const auto px = kernel_atoms_declared(data, t, fxs, a);
        const auto py = kernel_atoms_declared(data, t, fys, a);
        double sum = 0.0;
        for (const auto& at : px) sum += at.weight;
        max_norm_err = std::max(max_norm_err, std::abs(sum - 1.0));
        if (dist_t > 0) lip_q = std::max(lip_q, transport_distance(px, py) / dist_t);
      } catch (const InputError& e) {
        const std::string msg = e.what();
        if (msg.find("current state") != std::string::npos) ++atom_hits;
        else min_weight = -1.0;
      }
    }
    max_cost_sum = std::max(max_cost_sum, worst_cost + hx);
  }

  const double slack = 1e-9;
  auto& items = report.items;
  items.push_back({"intensity_bound", max_lambda, K.Clam,
                   max_lambda <= K.Clam + slack && min_lambda >= 0.0,
                   min_lambda < 0.0 ? "negative intensity sampled" : ""});
  items.push_back({"cost_bound", max_cost_sum, K.Cf, max_cost_sum <= K.Cf + slack && min_cost >= 0.0,
                   min_cost < 0.0 ? "negative cost sampled" : "sup_a l + h"});
  items.push_back({"drift_growth", max_growth, K.Cf, max_growth <= K.Cf + slack,
                   "|f| / (1 + sup|x|)"});
  items.push_back({"coefficient_lipschitz", lip_coeff, K.Lf, lip_coeff <= K.Lf * (1 + 1e-9) + slack,
                   "|df| + |dl| + |dlambda| over sup distance"});
  items.push_back({"terminal_lipschitz", lip_h, K.Lf, lip_h <= K.Lf * (1 + 1e-9) + slack, ""});
  items.push_back({"kernel_transport", lip_q, K.LQ, lip_q <= K.LQ * (1 + 1e-9) + slack,
                   data.dimension == 1 ? "exact W1" : "index-coupling upper bound on W1"});
  items.push_back({"kernel_normalization", max_norm_err, 1e-12,
                   max_norm_err <= 1e-12 && min_weight >= 0.0, ""});
  items.push_back({"kernel_avoids_current_state", static_cast<double>(atom_hits), 0.0,
                   atom_hits == 0, ""});
  items.push_back({"non_anticipation", static_cast<double>(anticipation), 0.0, anticipation == 0,
                   ""});
  return report;
}

}  // namespace pdp
