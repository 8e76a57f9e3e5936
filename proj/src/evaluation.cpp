#include "lumber/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lumber/ar1.hpp"
#include "lumber/diagnostics.hpp"
#include "lumber/errors.hpp"
#include "lumber/model.hpp"
#include "lumber/sampler.hpp"

namespace lumber {

std::vector<double> predict_strength(std::span<const ModelParams> draws, const Specimen& specimen,
                                     const CellGrid& grid, DecayKernel kernel, Rng& rng,
                                     int reps_per_draw) {
  if (draws.empty()) throw ValidationError("predict_strength: no posterior draws");
  if (reps_per_draw < 1) throw ValidationError("predict_strength: reps_per_draw must be >= 1");
  const Eigen::MatrixXd distances = distance_matrix(grid, specimen.knots);
  std::vector<double> out;
  out.reserve(draws.size() * static_cast<std::size_t>(reps_per_draw));
  for (const ModelParams& th : draws) {
    const Eigen::MatrixXd w = weight_matrix(distances, th.beta, grid.d_max, kernel);
    const Eigen::VectorXd effects = knot_effect_vector(specimen.knots, th.gamma0, th.gamma1);
    const Eigen::VectorXd reduction =
        effects.size() > 0 ? Eigen::VectorXd(w * effects) : Eigen::VectorXd::Zero(grid.cells);
    for (int r = 0; r < reps_per_draw; ++r) {
      const Eigen::VectorXd x =
          ar1_sample(rng, th.mean_strength(specimen.moe), th.rho, th.sigma, grid.cells);
      out.push_back((x - reduction).minCoeff());
    }
  }
  return out;
}

PredictiveSummary summarize_predictive(std::span<const double> predictive) {
  if (predictive.empty()) throw ValidationError("summarize_predictive: empty sample");
  std::vector<double> v(predictive.begin(), predictive.end());
  PredictiveSummary s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.lower = quantile(v, 0.025);
  s.upper = quantile(v, 0.975);
  s.draws = v.size();
  return s;
}

std::array<double, 5> test_quantities(std::span<const double> uts) {
  if (uts.size() < 2) throw ValidationError("test_quantities: need at least two values");
  std::vector<double> v(uts.begin(), uts.end());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)), quantile(v, 0.1), quantile(v, 0.5), quantile(v, 0.9)};
}

PpcReport posterior_predictive_check(std::span<const ModelParams> draws,
                                     std::span<const Specimen> specimens, const CellGrid& grid,
                                     DecayKernel kernel, Rng& rng) {
  if (draws.empty()) throw ValidationError("ppc: no posterior draws");
  std::vector<double> observed;
  for (const Specimen& s : specimens) {
    if (!s.uts) throw ValidationError("ppc: specimen " + s.id + " has no observed uts");
    observed.push_back(*s.uts);
  }
  const auto obs_q = test_quantities(observed);

  std::vector<Eigen::MatrixXd> distances;
  for (const Specimen& s : specimens) distances.push_back(distance_matrix(grid, s.knots));

  PpcReport report;
  for (std::size_t q = 0; q < kPpcQuantities.size(); ++q) {
    report.quantities.push_back({kPpcQuantities[q], {}, 0.0, 0.0, obs_q[q], 0.0});
    report.quantities.back().replicated.reserve(draws.size());
  }
  std::vector<double> replica(specimens.size());
  for (const ModelParams& th : draws) {
    for (std::size_t i = 0; i < specimens.size(); ++i) {
      const Specimen& s = specimens[i];
      const Eigen::VectorXd x = ar1_sample(rng, th.mean_strength(s.moe), th.rho, th.sigma, grid.cells);
      if (s.knots.empty()) {
        replica[i] = x.minCoeff();
      } else {
        const Eigen::MatrixXd w = weight_matrix(distances[i], th.beta, grid.d_max, kernel);
        replica[i] = (x - w * knot_effect_vector(s.knots, th.gamma0, th.gamma1)).minCoeff();
      }
    }
    const auto rq = test_quantities(replica);
    for (std::size_t q = 0; q < rq.size(); ++q) report.quantities[q].replicated.push_back(rq[q]);
  }
  for (PpcQuantity& q : report.quantities) {
    q.lower = quantile(q.replicated, 0.025);
    q.upper = quantile(q.replicated, 0.975);
    const auto above = std::count_if(q.replicated.begin(), q.replicated.end(),
                                     [&](double v) { return v >= q.observed; });
    q.p_value = static_cast<double>(above) / static_cast<double>(q.replicated.size());
  }
  return report;
}

Histogram histogram(std::span<const double> values, int bins) {
  if (values.empty() || bins < 1) throw ValidationError("histogram: need values and bins >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + b * width);
  h.edges.back() = hi;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(b, h.counts.size() - 1)]++;
  }
  return h;
}

double max_knot_volume(const Specimen& specimen) {
  double m = 0.0;
  for (const Knot& k : specimen.knots) m = std::max(m, k.volume);
  return m;
}

std::string RegressionModel::name() const {
  return features_ == Features::Moe ? "Regression1" : "Regression2";
}

Eigen::VectorXd RegressionModel::features_of(const Specimen& s) const {
  if (features_ == Features::Moe) return Eigen::VectorXd::Constant(1, s.moe);
  Eigen::VectorXd x(2);
  x << s.moe, max_knot_volume(s);
  return x;
}

void RegressionModel::fit(std::span<const Specimen> training, std::uint64_t) {
  const Eigen::Index p = features_ == Features::Moe ? 1 : 2;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(training.size()), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(training.size()));
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (!training[i].uts) throw ValidationError("regression: training specimen lacks uts");
    x.row(static_cast<Eigen::Index>(i)) = features_of(training[i]).transpose();
    y(static_cast<Eigen::Index>(i)) = *training[i].uts;
  }
  active_.clear();
  for (Eigen::Index c = 0; c < p; ++c) {
    if ((x.col(c).array() != 0.0).any()) active_.push_back(c);
  }
  fit_ = ols_fit(x(Eigen::all, active_), y);
}

Prediction RegressionModel::predict(const Specimen& specimen, Rng&) const {
  const Eigen::VectorXd features = features_of(specimen);
  const Interval iv = ols_predict_interval(fit_, features(active_));
  return {iv.mean, iv.lower, iv.upper};
}

void BayesianSpatialModel::fit(std::span<const Specimen> training, std::uint64_t seed) {
  PosteriorModel model(std::vector<Specimen>(training.begin(), training.end()), settings_.grid,
                       settings_.kernel, settings_.prior);
  HmcConfig cfg = settings_.hmc;
  cfg.seed = seed;
  const PosteriorDraws draws = run_chains(model, cfg);
  failed_ = draws.failed;
  draws_ = draws.thinned(settings_.predictive_draws);
}

Prediction BayesianSpatialModel::predict(const Specimen& specimen, Rng& rng) const {
  const auto sim = predict_strength(draws_, specimen, settings_.grid, settings_.kernel, rng);
  const PredictiveSummary s = summarize_predictive(sim);
  return {s.mean, s.lower, s.upper};
}

Metric metric_of(std::span<const double> contributions) {
  const double n = static_cast<double>(contributions.size());
  if (contributions.empty()) return {};
  const double mean = std::accumulate(contributions.begin(), contributions.end(), 0.0) / n;
  double ss = 0.0;
  for (double c : contributions) ss += (c - mean) * (c - mean);
  const double sd = contributions.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

std::vector<int> assign_folds(std::size_t n, int k, Rng& rng) {
  if (k < 1) throw ValidationError("cv: k must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with explicit draws so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return fold;
}

ModelScores score_predictions(std::string model, std::vector<Prediction> predictions,
                              std::span<const double> observed) {
  if (predictions.size() != observed.size()) {
    throw ValidationError("score_predictions: size mismatch");
  }
  std::vector<double> mean, sq, ab, len;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& p = predictions[i];
    const double err = p.mean - observed[i];
    mean.push_back(p.mean);
    sq.push_back(err * err);
    ab.push_back(std::abs(err));
    len.push_back(p.upper - p.lower);
  }
  ModelScores s;
  s.model = std::move(model);
  s.predictions = std::move(predictions);
  s.mean_prediction = metric_of(mean);
  s.mspe = metric_of(sq);
  s.mape = metric_of(ab);
  s.interval_length = metric_of(len);
  return s;
}

CvReport kfold_cv(std::span<const Specimen> specimens, int k,
                  std::span<PredictiveModel* const> models, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cv: k must be >= 2");
  if (specimens.size() < static_cast<std::size_t>(k)) {
    throw ValidationError("cv: fewer specimens than folds");
  }
  Rng fold_rng = make_stream(seed, {0xF01D});
  return kfold_cv(specimens, assign_folds(specimens.size(), k, fold_rng), models, seed);
}

CvReport kfold_cv(std::span<const Specimen> specimens, std::vector<int> fold_of,
                  std::span<PredictiveModel* const> models, std::uint64_t seed) {
  const std::size_t n = specimens.size();
  if (fold_of.size() != n) throw ValidationError("cv: fold assignment size mismatch");
  if (n == 0) throw ValidationError("cv: no specimens");
  const int k = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  if (k < 2 || *std::min_element(fold_of.begin(), fold_of.end()) < 0) {
    throw ValidationError("cv: folds must be numbered 0..k-1 with k >= 2");
  }
  CvReport report;
  for (const Specimen& s : specimens) {
    if (!s.uts) throw ValidationError("cv: specimen " + s.id + " has no observed uts");
    report.observed.push_back(*s.uts);
  }
  report.fold_of = std::move(fold_of);
  for (int f = 0; f < k; ++f) {
    if (std::count(report.fold_of.begin(), report.fold_of.end(), f) < 2) {
      throw ValidationError("cv: fold " + std::to_string(f) + " has fewer than 2 specimens");
    }
  }

  std::vector<std::vector<Prediction>> preds(models.size(), std::vector<Prediction>(n));
  for (int f = 0; f < k; ++f) {
    std::vector<Specimen> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (report.fold_of[i] != f) train.push_back(specimens[i]);
    }
    const std::uint64_t fit_seed = make_stream(seed, {static_cast<std::uint64_t>(f)})();
    for (std::size_t m = 0; m < models.size(); ++m) {
      models[m]->fit(train, fit_seed);
      for (std::size_t i = 0; i < n; ++i) {
        if (report.fold_of[i] != f) continue;
        Rng rng = make_stream(seed, {static_cast<std::uint64_t>(f), i});
        preds[m][i] = models[m]->predict(specimens[i], rng);
      }
    }
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    report.models.push_back(score_predictions(models[m]->name(), std::move(preds[m]), report.observed));
  }
  return report;
}

double subgroup_mspe(const ModelScores& scores, std::span<const double> observed,
                     const std::vector<bool>& mask) {
  if (mask.size() != observed.size() || scores.predictions.size() != observed.size()) {
    throw ValidationError("subgroup_mspe: size mismatch");
  }
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double e = scores.predictions[i].mean - observed[i];
    ss += e * e;
    ++count;
  }
  if (count == 0) throw ValidationError("subgroup_mspe: predicate selects no specimens");
  return ss / static_cast<double>(count);
}

bool has_large_knot_cluster(const Specimen& specimen, const CellGrid& grid, double thickness,
                            int min_count, double fraction) {
  const double threshold = fraction * grid.cell_length() * grid.width * thickness;
  const auto large = std::count_if(specimen.knots.begin(), specimen.knots.end(),
                                   [&](const Knot& k) { return k.volume > threshold; });
  return large >= min_count;
}

}  // namespace lumber
