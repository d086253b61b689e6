#include "pdp/discrete_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "pdp/builtins.hpp"
#include "pdp/error.hpp"
#include "pdp/expression.hpp"
#include "pdp/hjb_solver.hpp"
#include "pdp/parallel.hpp"
#include "pdp/problem_io.hpp"

namespace pdp {

using History = DiscreteDecisionModel::History;

namespace {

class Budget {
 public:
  explicit Budget(std::size_t cap) : cap_(cap) {}
  void tick() {
    if (++used_ > cap_)
      throw BudgetError("history enumeration exceeds the budget of " + std::to_string(cap_));
  }

 private:
  std::size_t cap_;
  std::size_t used_ = 0;
};

double checked_power(double base, double exp) { return std::pow(base, exp); }

std::vector<double> kernel_row(const DiscreteDecisionModel& m, std::size_t k, History xs, History us) {
  auto row = m.kernel(k, xs, us);
  if (row.size() != m.n_states())
    throw InputError("kernel row at stage " + std::to_string(k) + " has the wrong length");
  return row;
}

std::vector<double> policy_row(const DiscreteDecisionModel& m, const HistoryPolicy& pi, std::size_t k,
                               History xs, History us) {
  auto row = pi.rule(k, xs, us);
  if (row.size() != m.n_controls())
    throw InputError("policy row at stage " + std::to_string(k) + " has the wrong length");
  return row;
}

std::vector<double> unit_row(std::size_t n, std::size_t i) {
  std::vector<double> row(n, 0.0);
  row[i] = 1.0;
  return row;
}

}  // namespace

std::size_t DiscreteDecisionModel::state_index(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == name) return i;
  throw InputError("unknown state '" + std::string(name) + "'");
}

std::size_t DiscreteDecisionModel::control_index(std::string_view name) const {
  for (std::size_t i = 0; i < controls.size(); ++i)
    if (controls[i] == name) return i;
  throw InputError("unknown control '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Marginals and costs

double Marginal::at(std::span<const std::size_t> xs, std::span<const std::size_t> us) const {
  if (xs.size() != N || us.size() != N) throw InputError("marginal index has the wrong length");
  std::size_t idx = 0;
  for (std::size_t j = 0; j < N; ++j) idx = (idx * n_states + xs[j]) * n_controls + us[j];
  return mass[idx];
}

double Marginal::total() const {
  double t = 0.0;
  for (double m : mass) t += m;
  return t;
}

Marginal rollout_marginal(const DiscreteDecisionModel& model, const HistoryPolicy& policy,
                          std::span<const double> p0, std::size_t N, const EnumerationBudget& budget) {
  const std::size_t S = model.n_states(), U = model.n_controls();
  if (N == 0) throw InputError("marginal length must be positive");
  if (N > model.horizon + 2) throw InputError("marginal length exceeds horizon + 2");
  if (p0.size() != S) throw InputError("initial law has the wrong length");
  if (checked_power(static_cast<double>(S * U), static_cast<double>(N)) >
      static_cast<double>(budget.max_histories))
    throw BudgetError("marginal table exceeds the enumeration budget");
  Marginal out{N, S, U, {}};
  out.mass.assign(static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(S * U), N))), 0.0);
  std::vector<std::size_t> xs, us;
  Budget count(budget.max_histories);
  auto rec = [&](auto&& self, std::size_t j, std::size_t idx, double mass) -> void {
    count.tick();
    const auto mu = policy_row(model, policy, j, xs, us);
    for (std::size_t u = 0; u < U; ++u) {
      if (!(mu[u] > 0.0)) continue;
      const double m = mass * mu[u];
      const std::size_t id = idx * U + u;
      us.push_back(u);
      if (j + 1 == N) {
        out.mass[id] += m;
      } else {
        const auto p = kernel_row(model, j, xs, us);
        for (std::size_t w = 0; w < S; ++w) {
          if (!(p[w] > 0.0)) continue;
          xs.push_back(w);
          self(self, j + 1, id * S + w, m * p[w]);
          xs.pop_back();
        }
      }
      us.pop_back();
    }
  };
  for (std::size_t x0 = 0; x0 < S; ++x0) {
    if (!(p0[x0] > 0.0)) continue;
    xs.assign(1, x0);
    us.clear();
    rec(rec, 0, x0, p0[x0]);
  }
  return out;
}

double policy_cost(const DiscreteDecisionModel& model, const HistoryPolicy& policy, std::size_t x,
                   const EnumerationBudget& budget) {
  if (x >= model.n_states()) throw InputError("initial state out of range");
  std::vector<std::size_t> xs{x}, us;
  Budget count(budget.max_histories);
  auto rec = [&](auto&& self, std::size_t k) -> double {
    if (k >= model.horizon) return 0.0;
    count.tick();
    const auto mu = policy_row(model, policy, k, xs, us);
    double total = 0.0;
    for (std::size_t u = 0; u < model.n_controls(); ++u) {
      if (!(mu[u] > 0.0)) continue;
      us.push_back(u);
      double v = model.cost(k, xs, us);
      if (v != kInfeasible && k + 1 < model.horizon) {
        const auto p = kernel_row(model, k, xs, us);
        double acc = 0.0;
        for (std::size_t w = 0; w < model.n_states(); ++w) {
          if (!(p[w] > 0.0)) continue;
          xs.push_back(w);
          acc += p[w] * self(self, k + 1);
          xs.pop_back();
        }
        v += acc;
      }
      total += mu[u] * v;
      us.pop_back();
    }
    return total;
  };
  return rec(rec, 0);
}

namespace {

struct Bellman {
  double value = kInfeasible;
  std::size_t argmin = 0;
};

Bellman bellman(const DiscreteDecisionModel& model, std::size_t k, std::vector<std::size_t>& xs,
                std::vector<std::size_t>& us, Budget& count) {
  Bellman best;
  if (k >= model.horizon) {
    best.value = 0.0;
    return best;
  }
  count.tick();
  for (std::size_t u = 0; u < model.n_controls(); ++u) {
    us.push_back(u);
    double v = model.cost(k, xs, us);
    if (v != kInfeasible && k + 1 < model.horizon) {
      const auto p = kernel_row(model, k, xs, us);
      double acc = 0.0;
      for (std::size_t w = 0; w < model.n_states(); ++w) {
        if (!(p[w] > 0.0)) continue;
        xs.push_back(w);
        acc += p[w] * bellman(model, k + 1, xs, us, count).value;
        xs.pop_back();
      }
      v += acc;
    }
    us.pop_back();
    if (v < best.value) {
      best.value = v;
      best.argmin = u;
    }
  }
  return best;
}

}  // namespace

double tail_optimal_cost(const DiscreteDecisionModel& model, std::size_t k,
                         std::span<const std::size_t> xs, std::span<const std::size_t> us,
                         const EnumerationBudget& budget) {
  if (xs.size() != k + 1 || us.size() != k) throw InputError("history has the wrong length");
  std::vector<std::size_t> hx(xs.begin(), xs.end()), hu(us.begin(), us.end());
  Budget count(budget.max_histories);
  return bellman(model, k, hx, hu, count).value;
}

double optimal_cost(const DiscreteDecisionModel& model, std::size_t x, const EnumerationBudget& budget) {
  if (x >= model.n_states()) throw InputError("initial state out of range");
  const std::size_t xs[1] = {x};
  return tail_optimal_cost(model, 0, xs, {}, budget);
}

HistoryPolicy optimal_policy(const DiscreteDecisionModel& model, const EnumerationBudget& budget) {
  HistoryPolicy pi;
  pi.deterministic = true;
  pi.rule = [&model, budget](std::size_t k, History xs, History us) {
    if (k >= model.horizon) return unit_row(model.n_controls(), 0);
    std::vector<std::size_t> hx(xs.begin(), xs.end()), hu(us.begin(), us.end());
    Budget count(budget.max_histories);
    return unit_row(model.n_controls(), bellman(model, k, hx, hu, count).argmin);
  };
  return pi;
}

// ---------------------------------------------------------------------------
// Policy tables

std::size_t decision_point_count(const DiscreteDecisionModel& model, std::size_t stages) {
  std::size_t total = 0, block = model.n_states();
  for (std::size_t k = 0; k < stages; ++k) {
    total += block;
    block *= model.n_states() * model.n_controls();
  }
  return total;
}

std::size_t decision_point(const DiscreteDecisionModel& model, std::size_t k,
                           std::span<const std::size_t> xs, std::span<const std::size_t> us) {
  if (xs.size() != k + 1 || us.size() != k) throw InputError("history has the wrong length");
  std::size_t code = xs[0];
  for (std::size_t j = 0; j < k; ++j) code = (code * model.n_controls() + us[j]) * model.n_states() + xs[j + 1];
  return decision_point_count(model, k) + code;
}

namespace {

std::size_t covered_stages(const DiscreteDecisionModel& model, std::size_t entries) {
  std::size_t k = 0;
  while (decision_point_count(model, k) < entries) ++k;
  if (decision_point_count(model, k) != entries)
    throw InputError("policy table does not cover a whole number of stages");
  return k;
}

}  // namespace

HistoryPolicy table_policy(const DiscreteDecisionModel& model, std::vector<std::size_t> table) {
  const std::size_t stages = covered_stages(model, table.size());
  for (std::size_t u : table)
    if (u >= model.n_controls()) throw InputError("policy table entry out of range");
  HistoryPolicy pi;
  pi.deterministic = true;
  pi.rule = [&model, stages, table = std::move(table)](std::size_t k, History xs, History us) {
    if (k >= stages) return unit_row(model.n_controls(), 0);
    return unit_row(model.n_controls(), table[decision_point(model, k, xs, us)]);
  };
  return pi;
}

HistoryPolicy random_policy(const DiscreteDecisionModel& model, std::size_t stages, RandomStream& rng) {
  const std::size_t U = model.n_controls();
  const std::size_t D = decision_point_count(model, stages);
  auto rows = std::make_shared<std::vector<double>>(D * U);
  for (std::size_t d = 0; d < D; ++d) {
    double sum = 0.0;
    for (std::size_t u = 0; u < U; ++u) sum += (*rows)[d * U + u] = -std::log(rng.uniform_open());
    for (std::size_t u = 0; u < U; ++u) (*rows)[d * U + u] /= sum;
  }
  HistoryPolicy pi;
  pi.rule = [&model, stages, rows](std::size_t k, History xs, History us) {
    const std::size_t U = model.n_controls();
    if (k >= stages) return unit_row(U, 0);
    const std::size_t d = decision_point(model, k, xs, us);
    return std::vector<double>(rows->begin() + static_cast<std::ptrdiff_t>(d * U),
                               rows->begin() + static_cast<std::ptrdiff_t>((d + 1) * U));
  };
  return pi;
}

HistoryPolicy mix_policies(HistoryPolicy a, HistoryPolicy b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("mixture weight must lie in [0, 1]");
  HistoryPolicy pi;
  pi.deterministic = (a.deterministic && b.deterministic && (alpha == 0.0 || alpha == 1.0));
  pi.rule = [a = std::move(a), b = std::move(b), alpha](std::size_t k, History xs, History us) {
    // Probability each component assigns to the realized control history.
    double pa = alpha, pb = 1.0 - alpha;
    for (std::size_t j = 0; j < k; ++j) {
      pa *= a.rule(j, xs.first(j + 1), us.first(j))[us[j]];
      pb *= b.rule(j, xs.first(j + 1), us.first(j))[us[j]];
    }
    const auto ra = a.rule(k, xs, us);
    if (!(pa + pb > 0.0)) return ra;
    const auto rb = b.rule(k, xs, us);
    std::vector<double> row(ra.size());
    for (std::size_t u = 0; u < row.size(); ++u) row[u] = (pa * ra[u] + pb * rb[u]) / (pa + pb);
    return row;
  };
  return pi;
}

EnumerationResult enumerate_deterministic(const DiscreteDecisionModel& model, std::size_t x,
                                          std::size_t threads, const EnumerationBudget& budget) {
  const std::size_t D = decision_point_count(model, model.horizon);
  const std::size_t U = model.n_controls();
  if (checked_power(static_cast<double>(U), static_cast<double>(D)) > static_cast<double>(budget.max_policies))
    throw BudgetError("deterministic policy enumeration exceeds the budget (" + std::to_string(U) + "^" +
                      std::to_string(D) + " tables)");
  const auto n = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(U), D)));
  auto decode = [&](std::size_t code) {
    std::vector<std::size_t> table(D);
    for (std::size_t d = D; d-- > 0;) {
      table[d] = code % U;
      code /= U;
    }
    return table;
  };
  std::vector<double> costs(n);
  parallel_for(n, threads, [&](std::size_t i) {
    costs[i] = policy_cost(model, table_policy(model, decode(i)), x, budget);
  });
  EnumerationResult res;
  res.policies = n;
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (costs[i] < res.best_cost) {
      res.best_cost = costs[i];
      best = i;
    }
  res.best_table = decode(best);
  return res;
}

SufficiencyReport check_nonrandomized_sufficiency(const DiscreteDecisionModel& model, std::size_t x,
                                                  std::size_t n_random_policies, std::uint64_t seed,
                                                  const EnumerationBudget& budget) {
  SufficiencyReport rep;
  rep.optimal = optimal_cost(model, x, budget);
  rep.optimal_policy_cost = policy_cost(model, optimal_policy(model, budget), x, budget);
  rep.deterministic_attains = rep.optimal_policy_cost == rep.optimal;
  rep.samples = n_random_policies;
  for (std::size_t i = 0; i < n_random_policies; ++i) {
    RandomStream rng(seed, i);
    const double c = policy_cost(model, random_policy(model, model.horizon, rng), x, budget);
    const double margin = c == kInfeasible ? kInfeasible : c - rep.optimal;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (c < rep.optimal - 1e-10) ++rep.violations;
  }
  rep.pass = rep.violations == 0 && rep.deterministic_attains;
  return rep;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

constexpr std::size_t kAny = static_cast<std::size_t>(-1);

struct Rule {
  std::size_t stage = 0;
  std::vector<std::size_t> xs, us;
  std::vector<double> row;  // kernel
  double value = 0.0;       // cost
};

bool matches(const Rule& r, History xs, History us) {
  for (std::size_t i = 0; i < r.xs.size(); ++i)
    if (r.xs[i] != kAny && r.xs[i] != xs[i]) return false;
  for (std::size_t i = 0; i < r.us.size(); ++i)
    if (r.us[i] != kAny && r.us[i] != us[i]) return false;
  return true;
}

double parse_number(const std::string& tok, std::size_t line) {
  if (tok == "inf") return kInfeasible;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || !std::isfinite(v))
    throw InputError("line " + std::to_string(line) + ": '" + tok + "' is not a number");
  return v;
}

}  // namespace

DiscreteDecisionModel parse_mdp(std::string_view text) {
  auto model = std::make_shared<DiscreteDecisionModel>();
  auto kernels = std::make_shared<std::vector<Rule>>();
  auto costs = std::make_shared<std::vector<Rule>>();
  bool have_horizon = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string spaced;
    for (char c : raw) {
      if (c == '|' || c == ':') {
        spaced += ' ';
        spaced += c;
        spaced += ' ';
      } else {
        spaced += c;
      }
    }
    std::istringstream ls(spaced);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    const std::string& head = tok[0];
    if (head == "states" || head == "controls") {
      auto& list = head == "states" ? model->states : model->controls;
      if (!list.empty()) throw InputError(where + head + " declared twice");
      list.assign(tok.begin() + 1, tok.end());
      if (list.empty()) throw InputError(where + head + " list is empty");
      for (const auto& name : list)
        if (name == "*" || std::count(list.begin(), list.end(), name) > 1)
          throw InputError(where + "invalid or repeated name '" + name + "'");
      continue;
    }
    if (head == "horizon") {
      if (tok.size() != 2) throw InputError(where + "expected 'horizon <stages>'");
      const double k = parse_number(tok[1], line);
      if (k < 1 || k != std::floor(k)) throw InputError(where + "horizon must be a positive integer");
      model->horizon = static_cast<std::size_t>(k);
      have_horizon = true;
      continue;
    }
    if (head != "kernel" && head != "cost") throw InputError(where + "unknown directive '" + head + "'");
    if (model->states.empty() || model->controls.empty() || !have_horizon)
      throw InputError(where + "states, controls and horizon must precede rules");
    if (tok.size() < 2) throw InputError(where + "missing stage");
    const double kd = parse_number(tok[1], line);
    if (kd < 0 || kd != std::floor(kd)) throw InputError(where + "stage must be a nonnegative integer");
    Rule r;
    r.stage = static_cast<std::size_t>(kd);
    const auto bar = std::find(tok.begin(), tok.end(), "|");
    const auto colon = std::find(tok.begin(), tok.end(), ":");
    if (bar == tok.end() || colon == tok.end() || colon < bar)
      throw InputError(where + "expected '<states> | <controls> : <values>'");
    const auto n_x = static_cast<std::size_t>(bar - tok.begin() - 2);
    const auto n_u = static_cast<std::size_t>(colon - bar - 1);
    if (n_x != r.stage + 1 || n_u != r.stage + 1)
      throw InputError(where + "a stage-" + std::to_string(r.stage) + " rule needs " +
                       std::to_string(r.stage + 1) + " states and " + std::to_string(r.stage + 1) +
                       " controls");
    for (auto it = tok.begin() + 2; it != bar; ++it)
      r.xs.push_back(*it == "*" ? kAny : model->state_index(*it));
    for (auto it = bar + 1; it != colon; ++it)
      r.us.push_back(*it == "*" ? kAny : model->control_index(*it));
    std::vector<double> vals;
    for (auto it = colon + 1; it != tok.end(); ++it) vals.push_back(parse_number(*it, line));
    if (head == "kernel") {
      if (vals.size() != model->n_states())
        throw InputError(where + "kernel row needs " + std::to_string(model->n_states()) + " entries");
      double sum = 0.0;
      for (double p : vals) {
        if (!(p >= 0.0) || p == kInfeasible) throw InputError(where + "kernel entries must be finite and nonnegative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw InputError(where + "kernel row sums to " + format_real(sum));
      r.row = std::move(vals);
      kernels->push_back(std::move(r));
    } else {
      if (vals.size() != 1) throw InputError(where + "cost rule needs exactly one value");
      if (!(vals[0] >= 0.0)) throw InputError(where + "costs must be nonnegative");
      if (r.stage >= model->horizon) throw InputError(where + "cost rule beyond the horizon");
      r.value = vals[0];
      costs->push_back(std::move(r));
    }
  }
  if (model->states.empty() || model->controls.empty() || !have_horizon)
    throw InputError("model needs 'states', 'controls' and 'horizon'");
  const std::size_t S = model->n_states(), K = model->horizon;
  model->kernel = [kernels, S, K](std::size_t k, History xs, History us) {
    for (auto it = kernels->rbegin(); it != kernels->rend(); ++it)
      if (it->stage == k && matches(*it, xs, us)) return it->row;
    if (k + 1 >= K) return unit_row(S, xs.back());
    throw InputError("no kernel rule matches a stage-" + std::to_string(k) + " history");
  };
  model->cost = [costs](std::size_t k, History xs, History us) {
    for (auto it = costs->rbegin(); it != costs->rend(); ++it)
      if (it->stage == k && matches(*it, xs, us)) return it->value;
    return 0.0;
  };
  return std::move(*model);
}

DiscreteDecisionModel load_mdp_file(const std::string& path) {
  constexpr std::string_view prefix = "builtin:";
  if (path.starts_with(prefix)) return parse_mdp(builtin_mdp_source(std::string_view(path).substr(prefix.size())));
  return parse_mdp(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Bridge from the jump process

namespace {

constexpr std::size_t kCemetery = static_cast<std::size_t>(-1);

struct BridgeEntry {
  std::vector<std::pair<std::size_t, double>> row;
  double cost = 0.0;
};

struct BridgeTables {
  std::vector<std::string> names;
  std::map<std::vector<std::size_t>, BridgeEntry> entries;
};

std::vector<std::size_t> entry_key(History xs, History us) {
  std::vector<std::size_t> key(xs.begin(), xs.end());
  key.push_back(kCemetery);
  key.insert(key.end(), us.begin(), us.end());
  return key;
}

}  // namespace

DiscreteDecisionModel bridge_from_pdp(const ProblemData& data, double s, const CadlagPath& x,
                                      std::size_t stage_cap, const BridgeDiscretization& disc,
                                      const EnumerationBudget& budget) {
  if (!(s >= 0.0 && s <= data.horizon)) throw HorizonError("bridge start outside [0, T]");
  if (disc.time_steps == 0) throw InputError("bridge needs at least one time step");
  const double T = data.horizon;
  const TimeGrid grid{T, disc.time_steps};
  const std::size_t K = stage_cap + 1;
  std::size_t n_sched = 1;
  for (std::size_t i = 0; i <= disc.switches; ++i) n_sched *= data.n_controls();
  const std::size_t cem_ctrl = n_sched;

  auto tables = std::make_shared<BridgeTables>();
  std::map<std::pair<double, std::vector<double>>, std::size_t> state_ids;
  std::vector<double> state_time;
  auto state_of = [&](double t, std::span<const double> mark) {
    std::pair<double, std::vector<double>> key{t, std::vector<double>(mark.begin(), mark.end())};
    auto [it, fresh] = state_ids.emplace(key, tables->names.size());
    if (fresh) {
      state_time.push_back(t);
      std::string name = "t=" + format_real(t) + " x=(";
      for (std::size_t i = 0; i < mark.size(); ++i) name += (i ? "," : "") + format_real(mark[i]);
      tables->names.push_back(name + ")");
    }
    return it->second;
  };
  auto h = [&](std::span<const double> f) { return terminal_cost_at(data, f); };

  const auto x_s = x.eval(s);
  state_of(s, x_s);
  Budget count(budget.max_histories);
  std::vector<std::size_t> xs{0}, us;
  const std::span<const double> no_knots;

  auto explore = [&](auto&& self, std::size_t k, std::vector<double> feat, double t) -> void {
    const auto sched = schedule_grid(data, grid, no_knots, t, T, disc.switches, budget.max_policies);
    for (std::size_t u = 0; u <= cem_ctrl; ++u) {
      count.tick();
      us.push_back(u);
      BridgeEntry e;
      std::vector<std::pair<std::size_t, std::vector<double>>> children;
      if (u == cem_ctrl || u >= sched.size()) {
        e.cost = kInfeasible;
        e.row = {{kCemetery, 1.0}};
      } else {
        const OperatorPlan plan = build_operator_plan(data, grid, t, feat, sched[u], T);
        e.cost = plan.running + plan.chi_end * h(plan.end_feat);
        if (k + 1 >= K) {
          for (std::size_t j = 0; j < plan.jumps(); ++j) e.cost += plan.jump_weight[j] * h(plan.feat(j));
          e.row = {{kCemetery, 1.0}};
        } else {
          std::map<std::size_t, double> mass;
          for (std::size_t j = 0; j < plan.jumps(); ++j) {
            const std::size_t id = state_of(plan.jump_time[j], plan.mark(j));
            if (mass.emplace(id, 0.0).second)
              children.emplace_back(id, std::vector<double>(plan.feat(j).begin(), plan.feat(j).end()));
            mass[id] += plan.jump_weight[j];
          }
          e.row.assign(mass.begin(), mass.end());
          if (plan.chi_end > 0.0) e.row.emplace_back(kCemetery, plan.chi_end);
        }
      }
      tables->entries.emplace(entry_key(xs, us), std::move(e));
      std::sort(children.begin(), children.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [id, f] : children) {
        xs.push_back(id);
        self(self, k + 1, std::move(f), state_time[id]);
        xs.pop_back();
      }
      us.pop_back();
    }
  };
  explore(explore, 0, data.lift.of_path(x, s), s);

  const std::size_t cem = tables->names.size();
  tables->names.push_back("cemetery");

  DiscreteDecisionModel m;
  m.states = tables->names;
  for (std::size_t u = 0; u < n_sched; ++u) m.controls.push_back("schedule" + std::to_string(u));
  m.controls.push_back("cemetery");
  m.horizon = K;
  const std::size_t S = m.states.size();
  m.kernel = [tables, cem, S](std::size_t, History xs, History us) {
    std::vector<double> row(S, 0.0);
    if (xs.back() == cem) {
      row[cem] = 1.0;
      return row;
    }
    const auto it = tables->entries.find(entry_key(xs, us));
    if (it == tables->entries.end()) {
      row[cem] = 1.0;  // beyond the explored stages
      return row;
    }
    for (const auto& [id, p] : it->second.row) row[id == kCemetery ? cem : id] += p;
    return row;
  };
  m.cost = [tables, cem, cem_ctrl](std::size_t, History xs, History us) {
    if (xs.back() == cem) return us.back() == cem_ctrl ? 0.0 : kInfeasible;
    const auto it = tables->entries.find(entry_key(xs, us));
    if (it == tables->entries.end()) throw NumericError("history is not reachable in the bridge model");
    return it->second.cost;
  };
  return m;
}

}  // namespace pdp
