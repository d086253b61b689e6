#include <algorithm>

#include <gtest/gtest.h>

#include "pdp/builtins.hpp"
#include "pdp/error.hpp"
#include "pdp/expression.hpp"
#include "pdp/problem_io.hpp"
#include "support.hpp"

namespace pdp {
namespace {

using nlohmann::json;

TEST(ProblemSpec, MinimalConstantDocumentMapsFields) {
  const auto data = parse_problem_spec(builtin_source("constant_terminal"));
  EXPECT_EQ(data.name, "constant_terminal");
  EXPECT_EQ(data.constants.Clam, 0.5);
  EXPECT_EQ(data.constants.Cf, 3.0);
  EXPECT_EQ(data.horizon, 1.0);
  EXPECT_EQ(data.controls, std::vector<std::string>{"idle"});
  EXPECT_EQ(data.lift.size(), 1u);
  EXPECT_TRUE(data.intensity.is_constant());
}

TEST(ProblemSpec, AtomAtCurrentValueRejected) {
  json doc = test::base_document();
  doc["kernel"]["atoms"] = json::array({{{"mark", {"feat[0]"}}, {"weight", "1"}}});
  try {
    problem_from_json(doc);
    FAIL() << "expected rejection";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("current state"), std::string::npos) << e.what();
  }
}

TEST(ProblemSpec, SchemaViolations) {
  auto reject = [](const json& patch) {
    json doc = test::base_document();
    doc.merge_patch(patch);
    EXPECT_THROW(problem_from_json(doc), InputError) << patch.dump();
  };
  reject({{"horizon", -1.0}});
  reject({{"controls", json::array()}});
  reject({{"default_control", "b"}});
  reject({{"constants", {{"Cf", nullptr}}}});
  reject({{"drift", {"0", "0"}}});
  reject({{"unknown_field", 1}});
  reject({{"tables", {{"rate", {{"b", 1.0}}}}}});
  EXPECT_THROW(parse_problem_spec("{not json"), InputError);
}

TEST(ProblemSpec, ExpressionErrorsNameTheField) {
  json doc = test::base_document();
  doc["running_cost"] = "1 + * 2";
  try {
    problem_from_json(doc);
    FAIL() << "expected a syntax error";
  } catch (const ExprSyntaxError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("running_cost"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
  }
}

TEST(ProblemSpec, CanonicalRoundTripForBuiltins) {
  for (const auto& name : builtin_names()) {
    const auto data = load_problem("builtin:" + name);
    const std::string once = canonical_text(data);
    const std::string twice = canonical_text(parse_problem_spec(once));
    EXPECT_EQ(once, twice) << name;
    EXPECT_EQ(problem_hash(data), problem_hash(parse_problem_spec(once))) << name;
    EXPECT_EQ(problem_hash(data).size(), 16u);
  }
}

TEST(ProblemSpec, HashSeparatesProblems) {
  EXPECT_NE(problem_hash(load_problem("builtin:constant_terminal")),
            problem_hash(load_problem("builtin:unit_running")));
}

TEST(ProblemSpec, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(ProblemSpec, LoadFromFileAndUnknownBuiltin) {
  const std::string path = test::temp_path("fixture_problem.json");
  write_text_file(path, test::base_document().dump());
  EXPECT_EQ(load_problem(path).name, "fixture");
  EXPECT_THROW(load_problem("builtin:nope"), InputError);
  EXPECT_THROW(load_problem(test::temp_path("missing.json")), InputError);
}

TEST(Builtins, AllFourShipped) {
  const auto names = builtin_names();
  for (const char* n : {"constant_terminal", "unit_running", "two_control_markov", "running_max_pathdep"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  for (const auto& n : names) EXPECT_TRUE(validate_assumptions(builtin_problem(n), 100, 0).pass()) << n;
}

}  // namespace
}  // namespace pdp
