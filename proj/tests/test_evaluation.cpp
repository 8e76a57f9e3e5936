#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lumber/errors.hpp"
#include "lumber/evaluation.hpp"
#include "lumber/simulator.hpp"
#include "oracles.hpp"

using namespace lumber;

namespace {

class PerfectModel final : public PredictiveModel {
 public:
  std::string name() const override { return "Perfect"; }
  void fit(std::span<const Specimen>, std::uint64_t) override {}
  Prediction predict(const Specimen& s, Rng&) const override { return {*s.uts, *s.uts, *s.uts}; }
};

std::vector<Specimen> simulated(int n, std::uint64_t seed, double lambda = 0.01) {
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.lambda = lambda;
  return generate_dataset(cfg).specimens;
}

}  // namespace

TEST_CASE("OLS on a hand-checked three-point dataset") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  const Eigen::VectorXd y = (Eigen::VectorXd(3) << 1, 2, 3).finished();
  const OlsFit fit = ols_fit(x, y);
  CHECK(fit.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(fit.coefficients(1) == doctest::Approx(1.0).epsilon(1e-12));
  const Interval iv = ols_predict_interval(fit, Eigen::VectorXd::Constant(1, 4.0));
  CHECK(iv.mean == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(iv.upper - iv.lower == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("OLS matches the normal equations and the tabulated t quantile") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd x(12, 1);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = n(rng);
    y(i) = 2.0 - 0.5 * x(i, 0) + 0.3 * n(rng);
  }
  Eigen::MatrixXd design(12, 2);
  design.col(0).setOnes();
  design.col(1) = x.col(0);
  const Eigen::MatrixXd xtx_inv = (design.transpose() * design).inverse();
  const Eigen::VectorXd beta = xtx_inv * design.transpose() * y;
  const double s2 = (y - design * beta).squaredNorm() / 10.0;

  const OlsFit fit = ols_fit(x, y);
  CHECK(fit.coefficients(0) == doctest::Approx(beta(0)).epsilon(1e-12));
  CHECK(fit.coefficients(1) == doctest::Approx(beta(1)).epsilon(1e-12));
  CHECK(fit.residual_variance == doctest::Approx(s2).epsilon(1e-12));

  const Eigen::Vector2d at(1.0, 0.7);
  const double t_975_df10 = 2.2281388519649385;
  const double half = t_975_df10 * std::sqrt(s2 * (1.0 + at.dot(xtx_inv * at)));
  const Interval iv = ols_predict_interval(fit, Eigen::VectorXd::Constant(1, 0.7));
  CHECK(iv.mean == doctest::Approx(at.dot(beta)).epsilon(1e-12));
  CHECK(iv.upper - iv.mean == doctest::Approx(half).epsilon(1e-10));
  CHECK(iv.mean - iv.lower == doctest::Approx(half).epsilon(1e-10));
}

TEST_CASE("OLS rejects singular and undersized designs") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0, 1);
  CHECK_THROWS_AS(ols_fit(x, y), ValidationError);
  CHECK_THROWS_AS(ols_fit(x.topRows(3), y.head(3)), ValidationError);
}

TEST_CASE("knot-free training data: Regression 2 coincides with Regression 1") {
  const auto clear = simulated(40, 5, 1e-12);
  RegressionModel r1(RegressionModel::Features::Moe), r2(RegressionModel::Features::MoeMaxVolume);
  r1.fit(clear, 0);
  r2.fit(clear, 0);
  Rng rng(1);
  Specimen probe{"x", 2.0, {{10, 2, 5.0, true}}, std::nullopt, std::nullopt};
  for (const Specimen& s : {clear.front(), probe}) {
    const Prediction a = r1.predict(s, rng), b = r2.predict(s, rng);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(a.lower == doctest::Approx(b.lower).epsilon(1e-12));
    CHECK(a.upper == doctest::Approx(b.upper).epsilon(1e-12));
  }
  CHECK(max_knot_volume(clear.front()) == 0.0);
}

TEST_CASE("property: nested regressions never increase in-sample RSS") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = simulated(50, seed);
    RegressionModel r1(RegressionModel::Features::Moe), r2(RegressionModel::Features::MoeMaxVolume);
    r1.fit(data, 0);
    r2.fit(data, 0);
    CHECK(r2.ols().rss <= r1.ols().rss * (1 + 1e-12));
  }
}

TEST_CASE("a perfect predictor scores zero error") {
  const auto data = simulated(30, 6);
  PerfectModel perfect;
  std::vector<PredictiveModel*> models{&perfect};
  const CvReport r = kfold_cv(data, 5, models, 11);
  CHECK(r.models[0].mspe.value == 0.0);
  CHECK(r.models[0].mape.value == 0.0);
  CHECK(r.models[0].interval_length.value == 0.0);
}

TEST_CASE("folds partition the specimens into near-equal groups") {
  for (std::size_t n : {5u, 17u, 113u, 120u}) {
    Rng rng(n);
    const auto folds = assign_folds(n, 5, rng);
    REQUIRE(folds.size() == n);
    std::vector<int> sizes(5, 0);
    for (int f : folds) {
      REQUIRE(f >= 0);
      REQUIRE(f < 5);
      ++sizes[static_cast<std::size_t>(f)];
    }
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    CHECK(std::accumulate(sizes.begin(), sizes.end(), 0) == static_cast<int>(n));
  }
  const auto data = simulated(9, 7);
  RegressionModel r1(RegressionModel::Features::Moe);
  std::vector<PredictiveModel*> models{&r1};
  CHECK_THROWS_AS(kfold_cv(data, 5, models, 1), ValidationError);
  CHECK_THROWS_AS(kfold_cv(std::span(data).first(4), 5, models, 1), ValidationError);
}

TEST_CASE("CV metrics do not depend on specimen order under a fixed assignment") {
  const auto data = simulated(60, 8);
  Rng rng(2);
  const auto folds = assign_folds(data.size(), 5, rng);
  RegressionModel r1(RegressionModel::Features::Moe), r2(RegressionModel::Features::MoeMaxVolume);
  std::vector<PredictiveModel*> models{&r1, &r2};
  const CvReport a = kfold_cv(data, folds, models, 3);

  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<Specimen> shuffled;
  std::vector<int> shuffled_folds;
  for (std::size_t i : perm) {
    shuffled.push_back(data[i]);
    shuffled_folds.push_back(folds[i]);
  }
  const CvReport b = kfold_cv(shuffled, shuffled_folds, models, 3);
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK(a.models[m].mspe.value == doctest::Approx(b.models[m].mspe.value).epsilon(1e-10));
    CHECK(a.models[m].mape.value == doctest::Approx(b.models[m].mape.value).epsilon(1e-10));
    CHECK(a.models[m].interval_length.value ==
          doctest::Approx(b.models[m].interval_length.value).epsilon(1e-10));
  }
}

TEST_CASE("subgroup MSPE: full set, additivity, empty selection") {
  const auto data = simulated(40, 9);
  RegressionModel r2(RegressionModel::Features::MoeMaxVolume);
  std::vector<PredictiveModel*> models{&r2};
  const CvReport r = kfold_cv(data, 5, models, 5);
  const auto& scores = r.models[0];
  CHECK(subgroup_mspe(scores, r.observed, std::vector<bool>(40, true)) ==
        doctest::Approx(scores.mspe.value).epsilon(1e-12));

  std::vector<bool> knotted(40);
  for (std::size_t i = 0; i < 40; ++i) knotted[i] = data[i].knots.size() >= 5;
  std::vector<bool> rest(knotted.size());
  for (std::size_t i = 0; i < 40; ++i) rest[i] = !knotted[i];
  const double n1 = static_cast<double>(std::count(knotted.begin(), knotted.end(), true));
  REQUIRE(n1 > 0);
  REQUIRE(n1 < 40);
  CHECK(n1 * subgroup_mspe(scores, r.observed, knotted) +
            (40 - n1) * subgroup_mspe(scores, r.observed, rest) ==
        doctest::Approx(40 * scores.mspe.value).epsilon(1e-12));
  CHECK_THROWS_AS(subgroup_mspe(scores, r.observed, std::vector<bool>(40, false)), ValidationError);
}

TEST_CASE("large-knot-cluster predicate uses a 3.3 cubic inch threshold") {
  const CellGrid g;
  Specimen s{"k", 1.9, {}, 3.0, 1};
  for (int i = 0; i < 3; ++i) s.knots.push_back({10.0 * (i + 1), 2.0, 3.31, false});
  CHECK(has_large_knot_cluster(s, g));
  s.knots.back().volume = 3.29;
  CHECK_FALSE(has_large_knot_cluster(s, g));
  s.knots.push_back({70.0, 1.0, 50.0, true});
  CHECK(has_large_knot_cluster(s, g));
}

TEST_CASE("prediction: noise-free limit returns the mean strength") {
  const ModelParams th{3.0, 1.5, 0.3, 1e-6, 0.5, 0.25, 0.15};
  const std::vector<ModelParams> draws(50, th);
  const Specimen s{"c", 2.0, {}, std::nullopt, std::nullopt};
  Rng rng(1);
  const auto sim = predict_strength(draws, s, CellGrid{}, DecayKernel::Exponential, rng);
  CHECK(sim.size() == 50u);
  CHECK(summarize_predictive(sim).mean == doctest::Approx(6.0).epsilon(1e-5));
}

TEST_CASE("prediction: adding a large midspan knot lowers the mean") {
  const std::vector<ModelParams> draws(200, kReferenceTruth);
  Specimen s{"c", 1.9, {{20.0, 1.0, 8.0, false}}, std::nullopt, std::nullopt};
  Rng a(5), b(5);
  const double before = summarize_predictive(predict_strength(draws, s, CellGrid{}, DecayKernel::Exponential, a)).mean;
  s.knots.push_back({48.0, 2.75, 1000.0, true});
  const double after = summarize_predictive(predict_strength(draws, s, CellGrid{}, DecayKernel::Exponential, b)).mean;
  CHECK(after < before);
}

TEST_CASE("prediction: clear specimen matches the minimum-of-Gaussians oracle") {
  const ModelParams th = kReferenceTruth;
  const std::vector<ModelParams> draws(10000, th);
  const Specimen s{"c", 1.7, {}, std::nullopt, std::nullopt};
  Rng rng(6);
  const auto sim = predict_strength(draws, s, CellGrid{}, DecayKernel::Exponential, rng);
  const Eigen::MatrixXd L = oracle::ar1_covariance(24, th.rho, th.sigma).llt().matrixL();
  std::mt19937 orng(7);
  std::normal_distribution<double> z(0, 1);
  std::vector<double> ref;
  for (int i = 0; i < 100000; ++i) {
    Eigen::VectorXd e(24);
    for (auto& v : e) v = z(orng);
    ref.push_back(th.mean_strength(1.7) + (L * e).minCoeff());
  }
  CHECK(oracle::ks_distance(sim, ref) < 0.02);
}

TEST_CASE("summaries bracket the draws") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 0.0);
  const PredictiveSummary s = summarize_predictive(v);
  CHECK(s.lower <= s.upper);
  CHECK(s.mean == doctest::Approx(499.5));
  CHECK(s.draws == 1000u);
  CHECK_THROWS_AS(summarize_predictive(std::vector<double>{}), ValidationError);
}

TEST_CASE("ppc with a single draw") {
  const auto data = simulated(20, 10);
  const std::vector<ModelParams> one{kReferenceTruth};
  Rng rng(1);
  const PpcReport r = posterior_predictive_check(one, data, CellGrid{}, DecayKernel::Exponential, rng);
  REQUIRE(r.quantities.size() == 5u);
  for (const auto& q : r.quantities) {
    CHECK(q.replicated.size() == 1u);
    CHECK(q.lower == q.upper);
  }
  CHECK(r.quantities[0].name == "mean");
  CHECK(r.quantities[4].name == "p90");
}

TEST_CASE("ppc at the generating truth covers the observed quantities") {
  const auto data = simulated(360, 11);
  const std::vector<ModelParams> truth(1000, kReferenceTruth);
  Rng rng(2);
  const PpcReport r = posterior_predictive_check(truth, data, CellGrid{}, DecayKernel::Exponential, rng);
  int covered = 0;
  for (const auto& q : r.quantities) {
    covered += q.covered();
    CHECK(q.p_value >= 0.0);
    CHECK(q.p_value <= 1.0);
  }
  CHECK(covered >= 4);
}

TEST_CASE("ppc p-values under the truth are centred on one half") {
  // For one dataset the p-value is a single uniform draw; average over many.
  const std::vector<ModelParams> truth(200, kReferenceTruth);
  std::vector<double> p;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto data = simulated(60, 1000 + seed);
    Rng rng = make_stream(seed, {1});
    p.push_back(posterior_predictive_check(truth, data, CellGrid{}, DecayKernel::Exponential, rng)
                    .quantities[0]
                    .p_value);
  }
  CHECK(std::abs(oracle::mean(p) - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / 200.0));
}

TEST_CASE("predictive intervals at the truth cover held-out strengths") {
  const auto data = simulated(360, 12);
  const std::vector<ModelParams> truth(2000, kReferenceTruth);
  int covered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng = make_stream(13, {i});
    const auto s = summarize_predictive(predict_strength(truth, data[i], CellGrid{}, DecayKernel::Exponential, rng));
    covered += (*data[i].uts >= s.lower && *data[i].uts <= s.upper);
  }
  const double rate = covered / 360.0;
  CHECK(rate >= 0.90);
  CHECK(rate <= 0.99);
}

TEST_CASE("histogram counts every value once") {
  std::vector<double> v{0.0, 0.1, 0.5, 0.99, 1.0};
  const Histogram h = histogram(v, 4);
  CHECK(h.edges.size() == 5u);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 1.0);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == v.size());
  CHECK(h.counts.back() == 2u);
  const Histogram flat = histogram(std::vector<double>(3, 2.0), 3);
  CHECK(std::accumulate(flat.counts.begin(), flat.counts.end(), std::size_t{0}) == 3u);
}

TEST_CASE("metric standard error is sd over root n") {
  const std::vector<double> c{1.0, 2.0, 3.0, 4.0};
  const Metric m = metric_of(c);
  CHECK(m.value == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}
