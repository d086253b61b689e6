#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "pdp/problem_io.hpp"

namespace pdp::test {

/// One-dimensional single-control document; tests override fields.
inline nlohmann::json base_document() {
  return nlohmann::json::parse(R"({
    "name": "fixture",
    "dimension": 1,
    "horizon": 1.0,
    "controls": ["a"],
    "default_control": "a",
    "constants": {"Cf": 3.0, "Clam": 1.0, "Lf": 1.0, "LQ": 1.0},
    "lift": [{"kind": "terminal_value", "component": 0, "grid": {"lo": -4.0, "hi": 4.0, "n": 9}}],
    "drift": ["0"],
    "intensity": "1",
    "running_cost": "0",
    "terminal_cost": "0",
    "kernel": {"atoms": [{"mark": ["feat[0] + 1"], "weight": "1"}]}
  })");
}

inline ProblemData make_problem(const nlohmann::json& overrides) {
  nlohmann::json doc = base_document();
  doc.merge_patch(overrides);
  return problem_from_json(doc);
}

inline std::string temp_path(const std::string& name) {
  std::filesystem::create_directories(PDP_TEST_TMPDIR);
  return std::string(PDP_TEST_TMPDIR) + "/" + name;
}

}  // namespace pdp::test
