#include "pdp/path_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pdp/error.hpp"

namespace pdp {

double max_norm(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("dimension mismatch in path comparison");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

CadlagPath::CadlagPath(std::size_t dimension, std::vector<double> times, std::vector<double> values)
    : dim_(dimension), times_(std::move(times)), values_(std::move(values)) {
  if (dim_ == 0) throw InputError("path dimension must be positive");
  if (times_.empty()) throw InputError("path needs at least one knot");
  if (values_.size() != times_.size() * dim_) throw InputError("path values do not match knot count");
  if (times_.front() != 0.0) throw InputError("path must start at time 0");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] >= times_[k - 1])) throw InputError("path knot times must be non-decreasing");
    if (k >= 2 && times_[k] == times_[k - 2])
      throw InputError("at most two knots may share a time");
  }
  for (double v : values_)
    if (!std::isfinite(v)) throw InputError("path values must be finite");
}

CadlagPath CadlagPath::constant(const Mark& value, double horizon) {
  if (horizon < 0.0) throw InputError("negative horizon");
  std::vector<double> times{0.0};
  std::vector<double> values(value.begin(), value.end());
  if (horizon > 0.0) {
    times.push_back(horizon);
    values.insert(values.end(), value.begin(), value.end());
  }
  return CadlagPath(value.size(), std::move(times), std::move(values));
}

void CadlagPath::push_knot(double t, std::span<const double> value) {
  if (value.size() != dim_) throw InputError("knot dimension mismatch");
  if (!times_.empty()) {
    if (t < times_.back()) throw InputError("knots must be appended in time order");
    if (times_.size() >= 2 && t == times_[times_.size() - 2])
      throw InputError("at most two knots may share a time");
  } else if (t != 0.0) {
    throw InputError("path must start at time 0");
  }
  times_.push_back(t);
  values_.insert(values_.end(), value.begin(), value.end());
}

std::vector<double> CadlagPath::jump_times() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (is_jump_knot(k)) out.push_back(times_[k]);
  return out;
}

void CadlagPath::check_time(double t) const {
  if (!(t >= 0.0 && t <= horizon()))
    throw HorizonError("time " + std::to_string(t) + " outside path horizon [0, " +
                       std::to_string(horizon()) + "]");
}

Mark CadlagPath::eval(double t) const {
  check_time(t);
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const auto vk = knot_value(k);
  if (times_[k] == t) return Mark(vk.begin(), vk.end());
  const auto vn = knot_value(k + 1);
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  Mark out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = vk[i] + w * (vn[i] - vk[i]);
  return out;
}

Mark CadlagPath::left_limit(double t) const {
  check_time(t);
  if (t == 0.0) return eval(0.0);
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  const auto vk = knot_value(k);
  if (times_[k] == t) return Mark(vk.begin(), vk.end());
  const auto vp = knot_value(k - 1);
  const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
  Mark out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = vp[i] + w * (vk[i] - vp[i]);
  return out;
}

CadlagPath CadlagPath::truncate(double t) const {
  check_time(t);
  CadlagPath out;
  out.dim_ = dim_;
  for (std::size_t k = 0; k < times_.size() && times_[k] <= t; ++k) {
    out.times_.push_back(times_[k]);
    const auto v = knot_value(k);
    out.values_.insert(out.values_.end(), v.begin(), v.end());
  }
  if (out.times_.back() < t) out.push_knot(t, eval(t));
  return out;
}

CadlagPath CadlagPath::stop(double t) const {
  if (t == horizon()) return *this;
  CadlagPath out = truncate(t);
  const Mark at = eval(t);
  out.push_knot(horizon(), at);
  return out;
}

CadlagPath CadlagPath::concat(double s, const Mark& e) const {
  check_time(s);
  if (e.size() != dim_) throw InputError("mark dimension mismatch");
  if (s == 0.0) return constant(e, horizon());
  CadlagPath out;
  out.dim_ = dim_;
  for (std::size_t k = 0; k < times_.size() && times_[k] < s; ++k) {
    out.times_.push_back(times_[k]);
    const auto v = knot_value(k);
    out.values_.insert(out.values_.end(), v.begin(), v.end());
  }
  const Mark left = left_limit(s);
  out.push_knot(s, left);
  if (left != e) out.push_knot(s, e);
  if (horizon() > s) out.push_knot(horizon(), e);
  return out;
}

namespace {

void collect_times(const CadlagPath& x, double upto, std::vector<double>& out) {
  for (std::size_t k = 0; k < x.knot_count() && x.knot_time(k) <= upto; ++k)
    out.push_back(x.knot_time(k));
}

}  // namespace

double sup_dist(const CadlagPath& x, const CadlagPath& y, double s) {
  if (x.dimension() != y.dimension()) throw InputError("dimension mismatch in sup_dist");
  std::vector<double> ts{s};
  collect_times(x, s, ts);
  collect_times(y, s, ts);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  double m = 0.0;
  for (double t : ts) {
    m = std::max(m, max_norm(x.eval(t), y.eval(t)));
    m = std::max(m, max_norm(x.left_limit(t), y.left_limit(t)));
  }
  return m;
}

double pseudo_metric(double t, const CadlagPath& x, double s, const CadlagPath& y) {
  if (x.dimension() != y.dimension()) throw InputError("dimension mismatch in pseudo_metric");
  std::vector<double> rs{t, s};
  collect_times(x, t, rs);
  collect_times(y, s, rs);
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  // r -> x(r ^ t) is constant after t, so its left limit past t is x(t).
  auto stopped = [](const CadlagPath& p, double stop_at, double r, bool left) {
    if (r > stop_at) return p.eval(stop_at);
    return left ? p.left_limit(r) : p.eval(r);
  };
  double m = 0.0;
  for (double r : rs) {
    m = std::max(m, max_norm(stopped(x, t, r, false), stopped(y, s, r, false)));
    m = std::max(m, max_norm(stopped(x, t, r, true), stopped(y, s, r, true)));
  }
  return std::abs(t - s) + m;
}

std::string path_to_csv(const CadlagPath& path, std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += "t";
  for (std::size_t i = 0; i < path.dimension(); ++i) out += ",v" + std::to_string(i + 1);
  out += ",is_jump\n";
  char buf[64];
  for (std::size_t k = 0; k < path.knot_count(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", path.knot_time(k));
    out += buf;
    for (double v : path.knot_value(k)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += path.is_jump_knot(k) ? ",1\n" : ",0\n";
  }
  return out;
}

CadlagPath path_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<double> times, values;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 3 || cells.front() != "t" || cells.back() != "is_jump")
        throw InputError("path CSV header must be t,v1..vd,is_jump");
      dim = cells.size() - 2;
      have_header = true;
      continue;
    }
    if (cells.size() != dim + 2)
      throw InputError("path CSV line " + std::to_string(line_no) + ": wrong column count");
    double t;
    bool jump;
    try {
      t = std::stod(cells[0]);
      for (std::size_t i = 0; i < dim; ++i) values.push_back(std::stod(cells[1 + i]));
      jump = std::stoi(cells.back()) != 0;
    } catch (const std::exception&) {
      throw InputError("path CSV line " + std::to_string(line_no) + ": not a number");
    }
    if (!times.empty()) {
      const bool ok = jump ? t == times.back() : t > times.back();
      if (!ok)
        throw InputError("path CSV line " + std::to_string(line_no) +
                         ": times must increase (equal only on jump rows)");
    } else if (jump) {
      throw InputError("path CSV: first row cannot be a jump");
    }
    times.push_back(t);
  }
  if (!have_header) throw InputError("path CSV: missing header");
  return CadlagPath(dim, std::move(times), std::move(values));
}

}  // namespace pdp
