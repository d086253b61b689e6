#include "pdp/value_io.hpp"

#include <bit>
#include <cmath>

#include "pdp/error.hpp"
#include "pdp/problem_io.hpp"
#include "pdp/version.hpp"

namespace pdp {
namespace {

constexpr std::uint32_t kFormat = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>(v >> (8 * i) & 0xFFU));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw InputError("value file is truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint64_t hash_value(const ProblemData& data) {
  return std::stoull(problem_hash(data), nullptr, 16);
}

}  // namespace

std::string encode_value(const ProblemData& data, const ValueFunction& v) {
  Writer w;
  w.bytes("PDPV");
  w.u32(kFormat);
  w.u64(hash_value(data));
  const std::string ver{version()};
  w.u32(static_cast<std::uint32_t>(ver.size()));
  w.bytes(ver);
  w.u32(static_cast<std::uint32_t>(v.features().size()));
  for (const auto& f : v.features()) {
    w.f64(f.grid.lo);
    w.f64(f.grid.hi);
    w.u64(f.grid.n);
  }
  w.f64(v.grid().T);
  w.u64(v.grid().M);
  w.u64(v.quadrature().n_t);
  w.u64(v.partition().knots.size());
  for (double k : v.partition().knots) w.f64(k);
  for (double x : v.table()) w.f64(x);
  return w.take();
}

ValueFunction decode_value(const ProblemData& data, std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "PDPV") throw InputError("not a value file (bad magic)");
  if (const auto fmt = r.u32(); fmt != kFormat)
    throw InputError("unsupported value file format " + std::to_string(fmt));
  if (r.u64() != hash_value(data))
    throw InputError("value file was produced for a different problem (hash mismatch)");
  r.bytes(r.u32());
  const auto nf = r.u32();
  const auto& features = data.lift.features();
  if (nf != features.size()) throw InputError("value file feature count does not match the problem");
  for (const auto& f : features) {
    const double lo = r.f64(), hi = r.f64();
    const auto n = r.u64();
    if (lo != f.grid.lo || hi != f.grid.hi || n != f.grid.n)
      throw InputError("value file feature grid does not match the problem");
  }
  TimeGrid grid;
  grid.T = r.f64();
  grid.M = r.u64();
  QuadratureSpec quad;
  quad.n_t = r.u64();
  Partition part;
  const auto nk = r.u64();
  if (nk < 2 || quad.n_t == 0 || (nk - 1) * quad.n_t != grid.M)
    throw InputError("value file partition is inconsistent with its time grid");
  for (std::uint64_t k = 0; k < nk; ++k) part.knots.push_back(r.f64());
  for (std::size_t k = 0; k + 1 < part.knots.size(); ++k) {
    const double d = part.knots[k + 1] - part.knots[k];
    part.mesh = std::max(part.mesh, d);
    part.kappa.push_back(-std::expm1(-data.constants.Clam * d));
  }
  ValueFunction v(data, grid, part, quad);
  for (double& x : v.table()) x = r.f64();
  if (!r.done()) throw InputError("value file has trailing bytes");
  return v;
}

void write_value_file(const std::string& path, const ProblemData& data, const ValueFunction& v) {
  write_text_file(path, encode_value(data, v));
}

ValueFunction read_value_file(const std::string& path, const ProblemData& data) {
  return decode_value(data, read_text_file(path));
}

}  // namespace pdp
