#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pdp::cli {

/// Exit codes of pdpctl.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kInputError = 2,
  kNumericError = 3,
};

/// Everything one pdpctl invocation needs. Output paths left empty are not
/// written; logs go to standard error.
struct RunConfig {
  std::string subcommand;  ///< check | simulate | solve | evaluate | verify | mdp
  std::string problem;     ///< file path or builtin:<name>

  // Start point (s, x): x from a path CSV, else the constant path x0
  // (zeros when x0 is empty).
  double s = 0.0;
  std::string x_path;
  std::vector<double> x0;

  double dt = 1e-2;
  std::size_t nt = 64;
  double kappa = 0.5;
  double tol = 1e-6;
  std::size_t switches = 0;
  std::size_t n_rep = 1000;
  std::size_t samples = 50;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool crn = false;

  std::string policy;      ///< const:<label> | optimal | policy JSON file
  std::string value_path;  ///< value file read by evaluate / verify / simulate
  std::string out;
  std::string report;
  std::string stats;
  std::string check = "all";

  // mdp subcommand
  std::string model = "builtin:two_stage";
  std::string state;
  std::size_t length = 0;  ///< marginal length, 0 = horizon
  std::size_t stage_cap = 2;
  std::size_t bridge_steps = 4;
};

/// Runs one subcommand and returns its exit code. Errors are reported on
/// standard error with the failing operation named.
int run(const RunConfig& config);

/// Parses argv (seed default from PDP_SEED) and runs.
int run_cli(int argc, char** argv);

}  // namespace pdp::cli
