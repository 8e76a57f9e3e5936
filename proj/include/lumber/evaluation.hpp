#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lumber/hmc.hpp"
#include "lumber/posterior.hpp"
#include "lumber/rng.hpp"
#include "lumber/types.hpp"

namespace lumber {

// ---------------------------------------------------------------------------
// Posterior prediction

/// One simulated UTS per (draw x rep): X from the AR(1) process, Y from the
/// knot adjustment, strength = min(Y). Uses only moe and knots of `specimen`.
std::vector<double> predict_strength(std::span<const ModelParams> draws, const Specimen& specimen,
                                     const CellGrid& grid, DecayKernel kernel, Rng& rng,
                                     int reps_per_draw = 1);

struct PredictiveSummary {
  double mean = 0.0;
  double lower = 0.0;  ///< 2.5% quantile
  double upper = 0.0;  ///< 97.5% quantile
  std::size_t draws = 0;
};

PredictiveSummary summarize_predictive(std::span<const double> predictive);

// ---------------------------------------------------------------------------
// Posterior predictive checks

inline constexpr std::array<const char*, 5> kPpcQuantities = {"mean", "sd", "p10", "p50", "p90"};

/// mean, sample sd, 10th, 50th and 90th percentiles.
std::array<double, 5> test_quantities(std::span<const double> uts);

struct PpcQuantity {
  std::string name;
  std::vector<double> replicated;  ///< one per posterior draw used
  double lower = 0.0;              ///< central 95% interval of `replicated`
  double upper = 0.0;
  double observed = 0.0;
  double p_value = 0.0;  ///< share of replicated values >= observed
  bool covered() const { return observed >= lower && observed <= upper; }
};

struct PpcReport {
  std::vector<PpcQuantity> quantities;
};

PpcReport posterior_predictive_check(std::span<const ModelParams> draws,
                                     std::span<const Specimen> specimens, const CellGrid& grid,
                                     DecayKernel kernel, Rng& rng);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1
  std::vector<std::size_t> counts;
};

Histogram histogram(std::span<const double> values, int bins);

// ---------------------------------------------------------------------------
// Ordinary least squares baselines

struct OlsFit {
  Eigen::VectorXd coefficients;  ///< intercept first
  Eigen::MatrixXd xtx_inverse;
  double residual_variance = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t predictors = 0;  ///< excluding the intercept
};

/// Least squares with an intercept column prepended to `predictors` (n x p).
/// Requires n > p + 1; throws ValidationError on a singular design.
OlsFit ols_fit(const Eigen::MatrixXd& predictors, const Eigen::VectorXd& response);

struct Interval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// yhat +/- t_{n-p-1, (1+level)/2} * s * sqrt(1 + x'(X'X)^{-1} x), x with intercept.
Interval ols_predict_interval(const OlsFit& fit, const Eigen::VectorXd& point, double level = 0.95);

/// Largest knot volume; 0 for a clear specimen.
double max_knot_volume(const Specimen& specimen);

// ---------------------------------------------------------------------------
// Cross-validation

struct Prediction {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;
  virtual std::string name() const = 0;
  virtual void fit(std::span<const Specimen> training, std::uint64_t seed) = 0;
  virtual Prediction predict(const Specimen& specimen, Rng& rng) const = 0;
};

/// UTS ~ MOE (Regression 1) or UTS ~ MOE + max volume (Regression 2).
/// A feature column that is identically zero in the training data is dropped,
/// so Regression 2 on knot-free training data coincides with Regression 1.
class RegressionModel final : public PredictiveModel {
 public:
  enum class Features { Moe, MoeMaxVolume };
  explicit RegressionModel(Features features) : features_(features) {}
  std::string name() const override;
  void fit(std::span<const Specimen> training, std::uint64_t seed) override;
  Prediction predict(const Specimen& specimen, Rng& rng) const override;
  const OlsFit& ols() const { return fit_; }

 private:
  Eigen::VectorXd features_of(const Specimen& s) const;
  Features features_;
  std::vector<Eigen::Index> active_;
  OlsFit fit_;
};

struct BayesianSettings {
  CellGrid grid{};
  DecayKernel kernel = DecayKernel::Exponential;
  PriorSpec prior{};
  HmcConfig hmc{};
  std::size_t predictive_draws = 2000;
};

/// The spatial knot model fitted by HMC; predicts with the posterior predictive mean
/// and its 2.5%/97.5% quantiles.
class BayesianSpatialModel final : public PredictiveModel {
 public:
  explicit BayesianSpatialModel(BayesianSettings settings) : settings_(std::move(settings)) {}
  std::string name() const override { return "Bayesian"; }
  void fit(std::span<const Specimen> training, std::uint64_t seed) override;
  Prediction predict(const Specimen& specimen, Rng& rng) const override;
  bool last_fit_failed() const { return failed_; }
  const std::vector<ModelParams>& draws() const { return draws_; }

 private:
  BayesianSettings settings_;
  std::vector<ModelParams> draws_;
  bool failed_ = false;
};

struct Metric {
  double value = 0.0;
  double se = 0.0;
};

/// Mean and sd/sqrt(n) of per-specimen contributions.
Metric metric_of(std::span<const double> contributions);

struct ModelScores {
  std::string model;
  std::vector<Prediction> predictions;  ///< indexed like the input specimens
  Metric mean_prediction, mspe, mape, interval_length;
};

struct CvReport {
  std::vector<int> fold_of;  ///< 0-based fold per specimen
  std::vector<double> observed;
  std::vector<ModelScores> models;
};

/// Seeded shuffle, then round-robin into k near-equal folds.
std::vector<int> assign_folds(std::size_t n, int k, Rng& rng);

ModelScores score_predictions(std::string model, std::vector<Prediction> predictions,
                              std::span<const double> observed);

/// Fit each model on k-1 folds and predict the held-out fold. Model fits use
/// seed stream {fold}; predictions use stream {fold, specimen}.
CvReport kfold_cv(std::span<const Specimen> specimens, int k,
                  std::span<PredictiveModel* const> models, std::uint64_t seed);

/// Same, with a caller-supplied 0-based fold per specimen.
CvReport kfold_cv(std::span<const Specimen> specimens, std::vector<int> fold_of,
                  std::span<PredictiveModel* const> models, std::uint64_t seed);

/// MSPE over specimens selected by `mask`. Throws on an empty selection.
double subgroup_mspe(const ModelScores& scores, std::span<const double> observed,
                     const std::vector<bool>& mask);

/// At least `min_count` knots each larger than `fraction` of one cell's volume
/// (cell length x width x thickness).
bool has_large_knot_cluster(const Specimen& specimen, const CellGrid& grid,
                            double thickness = 1.5, int min_count = 3, double fraction = 0.1);

}  // namespace lumber
