#pragma once

#include <string>
#include <string_view>

#include "pdp/hjb_solver.hpp"

namespace pdp {

/// Binary value-table layout, all integers and doubles little-endian:
///
///   "PDPV"  u32 format version  u64 problem hash
///   u32 length + bytes          tool version
///   u32 F, then per feature     f64 lo, f64 hi, u64 n
///   f64 T, u64 M, u64 n_t       time grid
///   u64 N+1, f64 knots[N+1]     partition
///   f64 table[(M+1) * L]        time-major, feature 0 slowest
std::string encode_value(const ProblemData& data, const ValueFunction& v);

/// Inverse of encode_value. Throws InputError when the file is malformed
/// or was produced for a different problem.
ValueFunction decode_value(const ProblemData& data, std::string_view bytes);

void write_value_file(const std::string& path, const ProblemData& data, const ValueFunction& v);
ValueFunction read_value_file(const std::string& path, const ProblemData& data);

}  // namespace pdp
