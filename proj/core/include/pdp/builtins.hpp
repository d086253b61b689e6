#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pdp/model.hpp"

namespace pdp {

/// Names accepted by `builtin:<name>` problem references.
std::vector<std::string> builtin_names();
/// The problem document text of a built-in problem.
std::string_view builtin_source(std::string_view name);
ProblemData builtin_problem(std::string_view name);

/// Names and text of the built-in discrete decision models.
std::vector<std::string> builtin_mdp_names();
std::string_view builtin_mdp_source(std::string_view name);

}  // namespace pdp
