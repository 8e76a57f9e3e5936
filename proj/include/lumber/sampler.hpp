#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lumber/hmc.hpp"
#include "lumber/posterior.hpp"

namespace lumber {

/// Post-warmup draws of one chain on the constrained scale.
struct ChainDraws {
  Eigen::MatrixXd params;         ///< retained x 7, columns in ModelParams order
  Eigen::VectorXd log_posterior;  ///< unconstrained log density per retained draw
  Eigen::MatrixXd latents;        ///< retained x latent count; empty unless kept
  double mean_accept = 0.0;
  int divergences = 0;
  double step_size = 0.0;
  int max_steps = 0;
  Eigen::VectorXd inv_metric;
};

struct PosteriorDraws {
  std::vector<ChainDraws> chains;
  int warmup = 0;
  bool failed = false;  ///< some chain exceeded the divergence budget

  std::size_t total() const;
  /// Pooled over chains, chain-major.
  std::vector<ModelParams> pooled() const;
  /// Column `k` split by chain.
  std::vector<std::vector<double>> parameter_chains(std::size_t k) const;
  /// Every `stride`-th pooled draw such that at most `max_draws` are returned.
  std::vector<ModelParams> thinned(std::size_t max_draws) const;
};

struct Diagnostics {
  std::array<std::optional<double>, ModelParams::kCount> rhat{};
  std::array<double, ModelParams::kCount> ess{};
  std::vector<int> divergences;
  std::vector<double> mean_accept;
};

/// Share of post-warmup divergent transitions above which a run is failed.
inline constexpr double kMaxDivergentFraction = 0.10;

struct FitOptions {
  bool keep_latents = false;
};

/// Run the configured chains on the augmented posterior. Every stored draw is
/// checked against the parameter constraints and latent truncation.
PosteriorDraws run_chains(const PosteriorModel& model, const HmcConfig& config,
                          const FitOptions& options = {});

Diagnostics diagnose(const PosteriorDraws& draws);

struct QuantileRow {
  std::string parameter;
  std::vector<double> values;
};

/// Pooled posterior quantiles per parameter, default probs {0.5, 0.025, 0.975}.
std::vector<QuantileRow> posterior_quantiles(const PosteriorDraws& draws,
                                             const std::vector<double>& probs = {0.5, 0.025,
                                                                                 0.975});

}  // namespace lumber
