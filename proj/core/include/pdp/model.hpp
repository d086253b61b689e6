#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdp/expression.hpp"
#include "pdp/path_space.hpp"
#include "pdp/rng.hpp"

namespace pdp {

enum class FeatureKind { TerminalValue, RunningMax, RunningIntegral };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

/// Uniform grid lo = g_0 < ... < g_{n-1} = hi. n = 1 means a single point.
struct FeatureGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 1;

  double node(std::size_t k) const {
    if (n == 1) return lo;
    return k + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
};

struct PathFeature {
  FeatureKind kind = FeatureKind::TerminalValue;
  std::size_t component = 0;
  FeatureGrid grid;
};

/// Finite-dimensional summary of a stopped path.
///
/// Update rule between nodes (step h, new value x'): terminal value <- x',
/// running max <- max(M, x'), running integral += h (x + x') / 2. A jump is
/// the same update with h = 0. For piecewise-linear paths this is exact.
class Lift {
 public:
  Lift() = default;
  Lift(std::size_t dimension, std::vector<PathFeature> features);

  std::size_t size() const noexcept { return features_.size(); }
  std::size_t dimension() const noexcept { return terminal_.size(); }
  const std::vector<PathFeature>& features() const noexcept { return features_; }
  const PathFeature& operator[](std::size_t i) const { return features_[i]; }
  /// Index of the terminal_value feature of component c.
  std::size_t terminal_index(std::size_t c) const { return terminal_[c]; }

  /// Features of a path that has only been at x0.
  std::vector<double> initial(std::span<const double> x0) const;
  /// The current state x(t) read off the terminal features.
  Mark state(std::span<const double> feat) const;
  void state(std::span<const double> feat, std::span<double> out) const;

  void advance(std::span<double> feat, double h, std::span<const double> x_new) const;
  void jump(std::span<double> feat, std::span<const double> e) const { advance(feat, 0.0, e); }

  /// Features of x(. ^ t) computed by replaying the knots up to t.
  std::vector<double> of_path(const CadlagPath& x, double t) const;

  /// Total number of tensor-grid nodes.
  std::size_t node_count() const;
  /// Features at a flat tensor-grid index (feature 0 varies slowest).
  std::vector<double> node(std::size_t flat) const;

 private:
  std::vector<PathFeature> features_;
  std::vector<std::size_t> terminal_;
};

struct DeclaredConstants {
  double Cf = 0.0;
  double Clam = 0.0;
  double Lf = 0.0;
  double LQ = 0.0;
};

struct KernelAtom {
  std::vector<Expression> mark;  // one expression per component
  Expression weight;
};

/// The control problem (f, lambda, Q, l, h, A, T) over a finite action set.
struct ProblemData {
  std::string name;
  std::size_t dimension = 1;
  double horizon = 1.0;
  std::vector<std::string> controls;
  std::size_t default_control = 0;
  DeclaredConstants constants;
  Lift lift;
  ExprSymbols symbols;
  std::vector<Expression> drift;
  Expression intensity;
  Expression running_cost;
  Expression terminal_cost;
  std::vector<KernelAtom> atoms;
  bool normalize_kernel = true;
  std::size_t control_index(std::string_view label) const;
  std::size_t n_controls() const noexcept { return controls.size(); }
};

struct Coefficients {
  Mark drift;
  double intensity = 0.0;
  double cost = 0.0;
};

/// (f, lambda, l)(t, x, a) through the lift of x(. ^ t).
Coefficients evaluate_coefficients(const ProblemData& data, double t, const CadlagPath& x,
                                   std::size_t control);
Coefficients evaluate_coefficients(const ProblemData& data, double t, const CadlagPath& x,
                                   std::string_view control);

// Feature-level evaluation used on hot paths.
void drift_at(const ProblemData& data, double t, std::span<const double> feat,
              std::size_t control, std::span<double> out);
/// Throws NumericError when the intensity expression is negative.
double intensity_at(const ProblemData& data, double t, std::span<const double> feat,
                    std::size_t control);
double running_cost_at(const ProblemData& data, double t, std::span<const double> feat,
                       std::size_t control);
double terminal_cost_at(const ProblemData& data, std::span<const double> feat);

struct AtomValue {
  Mark mark;
  double weight = 0.0;
};

/// Kernel atoms in declaration order with normalized weights.
std::vector<AtomValue> kernel_atoms_declared(const ProblemData& data, double t,
                                             std::span<const double> feat, std::size_t control);

/// Kernel atoms at (t, features, a): lexicographically sorted by mark,
/// weights normalized. Throws InputError for a degenerate kernel (zero or
/// negative weights) or an atom at the current state.
std::vector<AtomValue> kernel_atoms(const ProblemData& data, double t,
                                    std::span<const double> feat, std::size_t control);

/// Inverse-CDF draw from Q(t, x, a, .) using the sorted atom order.
Mark sample_kernel(const ProblemData& data, double t, const CadlagPath& x, std::size_t control,
                   double u);
Mark sample_kernel_at(const ProblemData& data, double t, std::span<const double> feat,
                      std::size_t control, double u);

/// Random piecewise-linear path on [0, t_end] with up to `max_jumps` jumps,
/// values drawn inside the terminal-value grid ranges.
CadlagPath random_test_path(const ProblemData& data, double t_end, RandomStream& rng,
                            std::size_t max_jumps = 3);

struct ValidationItem {
  std::string name;
  double empirical = 0.0;
  double declared = 0.0;
  bool pass = true;
  std::string note;
};

struct ValidationReport {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<ValidationItem> items;
  bool pass() const;
};

/// Sampled check of the boundedness, Lipschitz and kernel conditions
/// against the declared constants. Violations are reported, not thrown.
ValidationReport validate_assumptions(const ProblemData& data, std::size_t n_samples,
                                      std::uint64_t seed);

/// W1 distance (max-norm ground metric) between two finite atom sets.
/// Exact in dimension 1; in higher dimension an upper bound from the
/// coupling that pairs atoms of equal index.
double transport_distance(const std::vector<AtomValue>& p, const std::vector<AtomValue>& q);

}  // namespace pdp
