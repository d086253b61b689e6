#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdp {

/// A point of the state space R^d: a path value or a post-jump location.
using Mark = std::vector<double>;

/// Right-continuous path with finitely many jumps on [0, horizon].
///
/// Stored as knots (t_k, v_k) with non-decreasing times starting at 0.
/// Between knots with distinct times the path is linear; two knots sharing
/// a time encode a jump (left limit first, then the value). The last knot
/// time is the horizon. Paths are immutable once built.
class CadlagPath {
 public:
  CadlagPath() = default;

  /// Builds from knot times and row-major values; throws InputError on
  /// malformed input (first time not 0, decreasing times, triple knots).
  CadlagPath(std::size_t dimension, std::vector<double> times, std::vector<double> values);

  static CadlagPath constant(const Mark& value, double horizon);

  std::size_t dimension() const noexcept { return dim_; }
  double horizon() const noexcept { return times_.empty() ? 0.0 : times_.back(); }
  std::size_t knot_count() const noexcept { return times_.size(); }
  double knot_time(std::size_t k) const { return times_[k]; }
  std::span<const double> knot_value(std::size_t k) const {
    return {values_.data() + k * dim_, dim_};
  }
  /// True when knot k is the post-jump half of a jump pair.
  bool is_jump_knot(std::size_t k) const { return k > 0 && times_[k] == times_[k - 1]; }
  std::vector<double> jump_times() const;

  /// x(t). Throws HorizonError outside [0, horizon].
  Mark eval(double t) const;
  /// x(t-); equals x(0) at t = 0.
  Mark left_limit(double t) const;

  /// The path restricted to [0, t]: knots up to t plus a knot at t.
  CadlagPath truncate(double t) const;
  /// x(. ^ t), represented up to the same horizon.
  CadlagPath stop(double t) const;
  /// x (x)_s e: x on [0, s), e on [s, horizon].
  CadlagPath concat(double s, const Mark& e) const;

  /// Appends a knot; used by builders that grow paths forward in time.
  void push_knot(double t, std::span<const double> value);

  bool operator==(const CadlagPath&) const = default;

 private:
  void check_time(double t) const;

  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// sup over [0, s] of the max-norm of x(t) - y(t). Exact for the
/// piecewise-linear-with-jumps representation.
double sup_dist(const CadlagPath& x, const CadlagPath& y, double s);

/// |t - s| + sup_r |x(r ^ t) - y(r ^ s)|.
double pseudo_metric(double t, const CadlagPath& x, double s, const CadlagPath& y);

/// CSV block with header `t,v1..vd,is_jump`.
std::string path_to_csv(const CadlagPath& path, std::string_view comment = {});
/// Parses a CSV block written by path_to_csv. Lines starting with '#' are
/// ignored. Rejects non-increasing times except on rows flagged as jumps.
CadlagPath path_from_csv(std::string_view text);

double max_norm(std::span<const double> a, std::span<const double> b);

}  // namespace pdp
