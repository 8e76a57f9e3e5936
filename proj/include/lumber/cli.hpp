#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lumber/evaluation.hpp"
#include "lumber/hmc.hpp"
#include "lumber/posterior.hpp"
#include "lumber/simulator.hpp"
#include "lumber/types.hpp"

namespace lumber {

/// Everything a CLI run needs. Defaults reproduce the published analysis:
/// J = 24 over a 96 in span, d_max = 96 in, exponential decay, 4 x 10000
/// HMC iterations with 5000 warmup.
struct RunConfig {
  CellGrid grid{};
  std::string kernel = "exponential";
  PriorSpec prior{};
  HmcConfig hmc{};
  SimConfig sim{};
  std::uint64_t seed = 20210601;

  std::string specimens = "specimens.csv";
  std::string knots = "knots.csv";
  std::string truth = "truth.csv";
  std::string column_map;

  std::string draws = "draws.csv";
  std::string diagnostics = "diagnostics.csv";
  std::string chain_stats = "chain_stats.csv";
  std::string summary = "summary.csv";

  std::string ppc_report = "ppc_report.csv";
  std::string ppc_hist_prefix = "ppc_hist_";
  std::size_t ppc_draws = 1000;
  int hist_bins = 30;

  std::string cv_report = "cv_report.csv";
  std::string cv_predictions = "cv_predictions.csv";
  int folds = 5;
  std::size_t predictive_draws = 2000;

  std::string predict_specimens;
  std::string predict_knots;
  std::string predictions = "predictions.csv";
  int predict_reps = 1;
};

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitSampler = 2 };

/// Entry point for the `lumber` tool. Subcommands: simulate, fit, summarize,
/// ppc, cv, predict. Errors go to stderr as `lumber: error[<kind>]: <message>`.
int run_cli(const std::vector<std::string>& args);

}  // namespace lumber
