#pragma once

#include "difstring/analytic_fields.hpp"
#include "difstring/gaussian_mixture.hpp"
#include "difstring/integrators.hpp"
#include "difstring/string_method.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace difstring::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Resolved configuration shared by every subcommand. Keys a command does not
/// use are still validated so a manifest can be fed back to any command.
struct RunConfig {
  // Target: a named preset or a mixture JSON file.
  std::string preset = "appendix_c";
  int dim = 2;
  std::string mixture;
  std::string schedule = "linear";

  // String.
  std::string regime = "mep";
  double gamma = 8.0;
  std::array<double, 2> gamma_window{0.1, 0.95};
  std::string quench = "hard_window";
  double ramp_width = 0.05;
  double temperature = 0.0;
  double eta = 0.2;
  int images = 71;
  std::string spline = "linear";
  double step_constant = 0.1;
  double t0 = 0.0;
  /// Data-space endpoints; empty means the preset's default (the two component means).
  std::vector<std::vector<double>> endpoints;
  bool encode = true;
  std::string encode_method = "heun";
  int encode_steps = 400;
  std::string method = "euler";
  /// 0 picks the smallest count honouring dt <= c / gamma^2 (at least 400).
  int n_steps = 0;
  int snapshot_every = 0;
  int record_every = 0;
  int likelihood_steps = 200;
  std::uint64_t seed = 0;

  // Likelihood.
  std::string input;
  std::string divergence = "exact";
  int likelihood_n_steps = 1000;

  // Score benchmark.
  int train_batch_size = 1000;
  int train_iterations = 20000;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-4;
  std::vector<int> hidden{64, 128, 64};
  int eval_times = 200;
  int eval_samples = 5000;
  bool identity_model = false;

  // Oracles.
  double oracle_t = 1.0;
  std::array<double, 2> grid_lo{-8.0, -10.0};
  std::array<double, 2> grid_hi{8.0, 10.0};
  std::array<int, 2> grid_n{401, 501};
  int oracle_iterations = 200000;
  double oracle_step = 0.02;
  int oracle_samples = 100000;

  /// Set by the CLI; recorded in the manifest but not a computation input.
  std::string out = "out";

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected; "tool_version" and "command" (manifest
  /// bookkeeping) are accepted and ignored.
  static RunConfig from_json(const nlohmann::json& j);
};

GaussianMixture make_target(const RunConfig& cfg);
RegimeConfig make_regime(const RunConfig& cfg);
/// Endpoints in data space (columns), defaulting to the preset's means.
std::array<VectorXd, 2> data_endpoints(const RunConfig& cfg, const GaussianMixture& target);

std::string tool_version();

int cmd_string_run(const RunConfig& cfg, std::ostream& log);
int cmd_likelihood(const RunConfig& cfg, std::ostream& log);
int cmd_score_benchmark(const RunConfig& cfg, std::ostream& log);
int cmd_oracle(const std::string& which, const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point (argv[0] is the program name). Errors are
/// reported on log and mapped to exit codes 2 (configuration) and 3 (runtime).
int run_cli(const std::vector<std::string>& args, std::ostream& log);

} // namespace difstring::cli
