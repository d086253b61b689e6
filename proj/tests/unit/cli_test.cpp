#include <gtest/gtest.h>

#include "pdp/builtins.hpp"
#include "pdp/problem_io.hpp"
#include "pdp/value_io.hpp"
#include "pdp/version.hpp"
#include "run.hpp"
#include "support.hpp"

namespace pdp::cli {
namespace {

using nlohmann::json;

RunConfig config(const std::string& sub, const std::string& problem) {
  RunConfig c;
  c.subcommand = sub;
  c.problem = problem;
  return c;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "pdpctl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

TEST(Cli, SolveConstantWritesValueFile) {
  auto c = config("solve", "builtin:constant_terminal");
  c.nt = 16;
  c.out = test::temp_path("cli_constant.bin");
  c.report = test::temp_path("cli_constant.json");
  ASSERT_EQ(run(c), kOk);
  const auto data = builtin_problem("constant_terminal");
  const auto v = read_value_file(c.out, data);
  for (double x : v.table()) EXPECT_NEAR(x, 3.0, 1e-6);
  const auto report = json::parse(read_text_file(c.report));
  EXPECT_EQ(report["problem_hash"], problem_hash(data));
  EXPECT_EQ(report["version"], std::string(version()));
  EXPECT_EQ(report["intervals"].size(), v.partition().intervals());
}

TEST(Cli, VerifyRegularityNeedsNoProblem) {
  auto c = config("verify", "");
  c.check = "regularity";
  c.out = test::temp_path("cli_regularity.json");
  ASSERT_EQ(run(c), kOk);
  const auto report = json::parse(read_text_file(c.out));
  ASSERT_EQ(report["checks"].size(), 1u);
  const auto& r = report["checks"][0];
  EXPECT_EQ(r["pass"], true);
  EXPECT_EQ(r["details"]["value_at_t0"], 1.0);
  EXPECT_EQ(r["details"]["value_after_t0"].size(), 2u);
  EXPECT_EQ(r["details"]["metric_gap"].size(), 10u);
}

TEST(Cli, SimulateIsReproducible) {
  auto c = config("simulate", "builtin:two_control_markov");
  c.n_rep = 1000;
  c.seed = 7;
  c.stats = test::temp_path("cli_stats_a.json");
  c.out = test::temp_path("cli_traj_a.csv");
  ASSERT_EQ(run(c), kOk);
  auto d = c;
  d.stats = test::temp_path("cli_stats_b.json");
  d.out = test::temp_path("cli_traj_b.csv");
  d.threads = 4;
  ASSERT_EQ(run(d), kOk);
  EXPECT_EQ(read_text_file(c.stats), read_text_file(d.stats));
  EXPECT_EQ(read_text_file(c.out), read_text_file(d.out));
  const auto stats = json::parse(read_text_file(c.stats));
  EXPECT_EQ(stats["seed"], 7);
  EXPECT_EQ(stats["estimate"]["n"], 1000);
  EXPECT_EQ(stats["problem_hash"], problem_hash(builtin_problem("two_control_markov")));
  EXPECT_NE(read_text_file(c.out).find(problem_hash(builtin_problem("two_control_markov"))), std::string::npos);
}

TEST(Cli, CheckEchoesCanonicalForm) {
  auto c = config("check", "builtin:running_max_pathdep");
  c.out = test::temp_path("cli_echo.json");
  c.report = test::temp_path("cli_check.json");
  c.samples = 50;
  ASSERT_EQ(run(c), kOk);
  const std::string echo = read_text_file(c.out);
  EXPECT_EQ(echo, canonical_text(parse_problem_spec(echo)));
  EXPECT_EQ(json::parse(read_text_file(c.report))["pass"], true);
}

TEST(Cli, CheckFailureExitCode) {
  auto doc = test::base_document();
  doc["intensity"] = "5";
  const std::string path = test::temp_path("cli_understated.json");
  write_text_file(path, doc.dump());
  EXPECT_EQ(run(config("check", path)), kCheckFailed);
}

TEST(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(run(config("solve", "builtin:nope")), kInputError);
  EXPECT_EQ(run(config("solve", "")), kInputError);
  auto c = config("verify", "builtin:constant_terminal");
  c.check = "nonsense";
  EXPECT_EQ(run(c), kInputError);
  EXPECT_EQ(run_args({"frobnicate"}), kInputError);
  EXPECT_EQ(run_args({"solve", "--nt", "abc"}), kInputError);
  EXPECT_EQ(run_args({"simulate", "--problem", "builtin:unit_running", "--policy", "const:warp"}), kInputError);
}

TEST(Cli, NumericFailureExitThree) {
  // Intensity goes negative on half the grid; the solver hits it while
  // building operator plans.
  auto doc = test::base_document();
  doc["intensity"] = "feat[0]";
  const std::string path = test::temp_path("cli_negative_rate.json");
  write_text_file(path, doc.dump());
  auto c = config("solve", path);
  c.nt = 8;
  EXPECT_EQ(run(c), kNumericError);
}

TEST(Cli, ArgumentParsing) {
  const std::string out = test::temp_path("cli_args.json");
  ASSERT_EQ(run_args({"evaluate", "--problem", "builtin:unit_running", "--s", "0.25", "--nt", "64", "--out", out}), kOk);
  const auto j = json::parse(read_text_file(out));
  EXPECT_NEAR(j["value"].get<double>(), 0.75, 1e-4);
  EXPECT_EQ(j["s"], 0.25);
}

TEST(Cli, MdpChecksOnShippedModel) {
  auto c = config("mdp", "");
  c.samples = 200;
  c.out = test::temp_path("cli_mdp.json");
  ASSERT_EQ(run(c), kOk);
  const auto j = json::parse(read_text_file(c.out));
  EXPECT_EQ(j["pass"], true);
  EXPECT_NEAR(j["optimal"]["optimal_cost"].get<double>(), 1.36, 1e-12);
  EXPECT_EQ(j["sufficiency"]["violations"], 0);
}

}  // namespace
}  // namespace pdp::cli
