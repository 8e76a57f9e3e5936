#include "lumber/cli.hpp"

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "lumber/diagnostics.hpp"
#include "lumber/errors.hpp"
#include "lumber/io.hpp"
#include "lumber/sampler.hpp"

namespace lumber {

namespace {

void add_options(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "key = value configuration file (TOML subset)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--seed", c.seed, "Base RNG seed")->capture_default_str();

  app.add_option("--cells", c.grid.cells, "Number of cells J")->capture_default_str();
  app.add_option("--span", c.grid.span_length, "Test span length (in)")->capture_default_str();
  app.add_option("--width", c.grid.width, "Wide-face width (in)")->capture_default_str();
  app.add_option("--d_max", c.grid.d_max, "Knot influence cutoff (in)")->capture_default_str();
  app.add_option("--kernel", c.kernel, "Decay kernel")
      ->check(CLI::IsMember({"exponential", "power", "gaussian"}))
      ->capture_default_str();

  app.add_option("--prior_sd_eta", c.prior.sd_eta)->capture_default_str();
  app.add_option("--prior_rho_loc", c.prior.rho_loc)->capture_default_str();
  app.add_option("--prior_rho_scale", c.prior.rho_scale)->capture_default_str();
  app.add_option("--prior_half_normal_scale", c.prior.half_normal_scale)->capture_default_str();
  app.add_option("--prior_cauchy_scale", c.prior.cauchy_scale)->capture_default_str();

  app.add_option("--chains", c.hmc.chains)->capture_default_str();
  app.add_option("--iterations", c.hmc.iterations, "Iterations per chain incl. warmup")
      ->capture_default_str();
  app.add_option("--warmup", c.hmc.warmup)->capture_default_str();
  app.add_option("--target_accept", c.hmc.target_accept)->capture_default_str();
  app.add_option("--max_leapfrog_steps", c.hmc.max_leapfrog_steps)->capture_default_str();
  app.add_option("--adapt_mass", c.hmc.adapt_mass)->capture_default_str();

  app.add_option("--n", c.sim.n, "Simulated specimen count")->capture_default_str();
  app.add_option("--lambda", c.sim.lambda, "Knot intensity per in^2")->capture_default_str();
  app.add_option("--p_edge", c.sim.p_edge)->capture_default_str();
  app.add_option("--volume_shape", c.sim.volume_shape)->capture_default_str();
  app.add_option("--volume_scale", c.sim.volume_scale)->capture_default_str();
  app.add_option("--moe_mean", c.sim.moe_mean)->capture_default_str();
  app.add_option("--moe_sd", c.sim.moe_sd)->capture_default_str();
  app.add_option("--true_eta0", c.sim.truth.eta0)->capture_default_str();
  app.add_option("--true_eta1", c.sim.truth.eta1)->capture_default_str();
  app.add_option("--true_rho", c.sim.truth.rho)->capture_default_str();
  app.add_option("--true_sigma", c.sim.truth.sigma)->capture_default_str();
  app.add_option("--true_beta", c.sim.truth.beta)->capture_default_str();
  app.add_option("--true_gamma0", c.sim.truth.gamma0)->capture_default_str();
  app.add_option("--true_gamma1", c.sim.truth.gamma1)->capture_default_str();

  app.add_option("--specimens", c.specimens)->capture_default_str();
  app.add_option("--knots", c.knots)->capture_default_str();
  app.add_option("--truth", c.truth)->capture_default_str();
  app.add_option("--column_map", c.column_map, "Column mapping file for foreign datasets");

  app.add_option("--draws", c.draws)->capture_default_str();
  app.add_option("--diagnostics", c.diagnostics)->capture_default_str();
  app.add_option("--chain_stats", c.chain_stats)->capture_default_str();
  app.add_option("--summary", c.summary)->capture_default_str();

  app.add_option("--ppc_report", c.ppc_report)->capture_default_str();
  app.add_option("--ppc_hist_prefix", c.ppc_hist_prefix)->capture_default_str();
  app.add_option("--ppc_draws", c.ppc_draws)->capture_default_str();
  app.add_option("--hist_bins", c.hist_bins)->capture_default_str();

  app.add_option("--cv_report", c.cv_report)->capture_default_str();
  app.add_option("--cv_predictions", c.cv_predictions)->capture_default_str();
  app.add_option("--folds", c.folds)->capture_default_str();
  app.add_option("--predictive_draws", c.predictive_draws)->capture_default_str();

  app.add_option("--predict_specimens", c.predict_specimens);
  app.add_option("--predict_knots", c.predict_knots);
  app.add_option("--predictions", c.predictions)->capture_default_str();
  app.add_option("--predict_reps", c.predict_reps)->capture_default_str();
}

std::vector<Specimen> load_data(const RunConfig& c) {
  const ColumnMapping mapping = c.column_map.empty() ? ColumnMapping{} : load_column_mapping(c.column_map);
  return ingest(c.specimens, c.knots, c.grid, mapping);
}

int cmd_simulate(const RunConfig& c) {
  SimConfig sim = c.sim;
  sim.grid = c.grid;
  sim.kernel = parse_kernel(c.kernel);
  sim.seed = c.seed;
  const SimulatedDataset data = generate_dataset(sim);
  atomic_write(c.specimens, specimens_csv(data.specimens));
  atomic_write(c.knots, knots_csv(data.specimens));
  atomic_write(c.truth, truth_csv(data.truth));
  std::cout << "simulated " << data.specimens.size() << " specimens -> " << c.specimens << ", "
            << c.knots << ", " << c.truth << '\n';
  return kExitOk;
}

int cmd_fit(const RunConfig& c) {
  const auto specimens = load_data(c);
  const PosteriorModel model(specimens, c.grid, parse_kernel(c.kernel), c.prior);
  HmcConfig hmc = c.hmc;
  hmc.seed = c.seed;
  const PosteriorDraws draws = run_chains(model, hmc);
  const Diagnostics diag = diagnose(draws);
  atomic_write(c.draws, draws_csv(draws));
  atomic_write(c.diagnostics, diagnostics_csv(diag));
  atomic_write(c.chain_stats, chain_stats_csv(draws));
  std::cout << "fit " << specimens.size() << " specimens, " << draws.total()
            << " retained draws -> " << c.draws << '\n';
  if (draws.failed) {
    throw SamplerFailure("more than 10% divergent transitions in at least one chain");
  }
  return kExitOk;
}

int cmd_summarize(const RunConfig& c) {
  const PosteriorDraws draws = read_draws_csv(c.draws);
  atomic_write(c.summary, summary_csv(posterior_quantiles(draws)));
  std::cout << "summary -> " << c.summary << '\n';
  return kExitOk;
}

int cmd_ppc(const RunConfig& c) {
  const auto specimens = load_data(c);
  const PosteriorDraws draws = read_draws_csv(c.draws);
  const auto used = draws.thinned(c.ppc_draws);
  Rng rng = make_stream(c.seed, {0x99C});
  const PpcReport report =
      posterior_predictive_check(used, specimens, c.grid, parse_kernel(c.kernel), rng);
  atomic_write(c.ppc_report, ppc_csv(report));
  for (const PpcQuantity& q : report.quantities) {
    atomic_write(c.ppc_hist_prefix + q.name + ".csv", histogram_csv(histogram(q.replicated, c.hist_bins)));
  }
  std::cout << "ppc over " << used.size() << " draws -> " << c.ppc_report << '\n';
  return kExitOk;
}

int cmd_cv(const RunConfig& c) {
  const auto specimens = load_data(c);
  RegressionModel reg1(RegressionModel::Features::Moe);
  RegressionModel reg2(RegressionModel::Features::MoeMaxVolume);
  BayesianSettings settings;
  settings.grid = c.grid;
  settings.kernel = parse_kernel(c.kernel);
  settings.prior = c.prior;
  settings.hmc = c.hmc;
  settings.predictive_draws = c.predictive_draws;
  BayesianSpatialModel bayes(settings);
  std::vector<PredictiveModel*> models{&reg1, &reg2, &bayes};
  const CvReport report = kfold_cv(specimens, c.folds, models, c.seed);
  atomic_write(c.cv_report, cv_csv(report));
  atomic_write(c.cv_predictions, cv_predictions_csv(report, specimens));
  std::cout << c.folds << "-fold cross-validation -> " << c.cv_report << '\n';
  return kExitOk;
}

int cmd_predict(const RunConfig& c) {
  if (c.predict_specimens.empty() || c.predict_knots.empty()) {
    throw ValidationError("predict needs --predict_specimens and --predict_knots");
  }
  const ColumnMapping mapping = c.column_map.empty() ? ColumnMapping{} : load_column_mapping(c.column_map);
  const auto specimens = ingest(c.predict_specimens, c.predict_knots, c.grid, mapping);
  const PosteriorDraws draws = read_draws_csv(c.draws);
  const auto used = draws.thinned(c.predictive_draws);
  const DecayKernel kernel = parse_kernel(c.kernel);
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < specimens.size(); ++i) {
    Rng rng = make_stream(c.seed, {0x9ED, i});
    const auto sim = predict_strength(used, specimens[i], c.grid, kernel, rng, c.predict_reps);
    rows.push_back({specimens[i].id, summarize_predictive(sim)});
  }
  atomic_write(c.predictions, predictions_csv(rows));
  std::cout << "predicted " << rows.size() << " specimens -> " << c.predictions << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  RunConfig config;
  CLI::App app{"Bayesian spatial knot model for lumber tensile strength", "lumber"};
  add_options(app, config);
  app.require_subcommand(1, 1);
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  auto* fit = app.add_subcommand("fit", "Run HMC on the augmented posterior");
  auto* summarize = app.add_subcommand("summarize", "Posterior quantile table from saved draws");
  auto* ppc = app.add_subcommand("ppc", "Posterior predictive checks");
  auto* cv = app.add_subcommand("cv", "K-fold cross-validation against regression baselines");
  auto* predict = app.add_subcommand("predict", "Score new specimens from saved draws");
  for (auto* sub : {simulate, fit, summarize, ppc, cv, predict}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "lumber: error[validation]: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    config.grid.validate();
    config.prior.validate();
    config.hmc.validate();
    if (*simulate) return cmd_simulate(config);
    if (*fit) return cmd_fit(config);
    if (*summarize) return cmd_summarize(config);
    if (*ppc) return cmd_ppc(config);
    if (*cv) return cmd_cv(config);
    if (*predict) return cmd_predict(config);
  } catch (const SamplerFailure& e) {
    std::cerr << "lumber: error[sampler]: " << e.what() << '\n';
    return kExitSampler;
  } catch (const NumericalError& e) {
    std::cerr << "lumber: error[numerical]: " << e.what() << '\n';
    return kExitSampler;
  } catch (const ValidationError& e) {
    std::cerr << "lumber: error[validation]: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "lumber: error[io]: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace lumber
