#include "pdp/builtins.hpp"

#include "pdp/error.hpp"
#include "pdp/problem_io.hpp"

namespace pdp {

namespace {
#include "builtins_data.inc"
}  // namespace

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltins) out.emplace_back(b.name);
  return out;
}

std::string_view builtin_source(std::string_view name) {
  for (const auto& b : kBuiltins)
    if (name == b.name) return b.source;
  std::string known;
  for (const auto& b : kBuiltins) known += std::string(known.empty() ? "" : ", ") + b.name;
  throw InputError("unknown builtin problem '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> builtin_mdp_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltinMdps) out.emplace_back(b.name);
  return out;
}

std::string_view builtin_mdp_source(std::string_view name) {
  for (const auto& b : kBuiltinMdps)
    if (name == b.name) return b.source;
  throw InputError("unknown builtin decision model '" + std::string(name) + "'");
}

ProblemData builtin_problem(std::string_view name) {
  return parse_problem_spec(builtin_source(name));
}

}  // namespace pdp
