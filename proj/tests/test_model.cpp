#include <doctest.h>

#include <cmath>
#include <random>

#include "lumber/errors.hpp"
#include "lumber/model.hpp"

using namespace lumber;

namespace {

CellGrid paper_grid() { return CellGrid{24, 96.0, 5.5, 96.0}; }

std::vector<Knot> random_knots(std::mt19937_64& rng, const CellGrid& g, int count) {
  std::uniform_real_distribution<double> x(0.0, g.span_length), y(0.0, g.width), v(0.5, 30.0);
  std::bernoulli_distribution e(0.5);
  std::vector<Knot> out(static_cast<std::size_t>(count));
  for (auto& k : out) k = {x(rng), y(rng), v(rng), e(rng)};
  return out;
}

}  // namespace

TEST_CASE("cell centroids") {
  auto c = cell_centroids(paper_grid());
  REQUIRE(c.size() == 24);
  CHECK(c[0].x == 2.0);
  CHECK(c[0].y == 2.75);
  CHECK(c[23].x == 94.0);

  auto one = cell_centroids({1, 96.0, 5.5, 96.0});
  REQUIRE(one.size() == 1);
  CHECK(one[0].x == 48.0);
  CHECK(one[0].y == 2.75);

  auto two = cell_centroids({2, 96.0, 5.5, 96.0});
  CHECK(two[0].x == 24.0);
  CHECK(two[1].x == 72.0);

  CHECK_THROWS_AS(cell_centroids({0, 96.0, 5.5, 96.0}), ValidationError);
  CHECK_THROWS_AS(cell_centroids({24, 96.0, 0.0, 96.0}), ValidationError);
}

TEST_CASE("distance matrix") {
  const CellGrid g = paper_grid();
  std::vector<Knot> knots{{2.0, 2.75, 1.0, false}, {2.0, 0.0, 1.0, false}, {6.0, 5.5, 1.0, true}};
  const Eigen::MatrixXd d = distance_matrix(g, knots);
  REQUIRE(d.rows() == 24);
  REQUIRE(d.cols() == 3);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == doctest::Approx(2.75).epsilon(1e-15));
  CHECK(d(0, 2) == doctest::Approx(4.8541219597369).epsilon(1e-12));

  const Eigen::MatrixXd empty = distance_matrix(g, {});
  CHECK(empty.rows() == 24);
  CHECK(empty.cols() == 0);
}

TEST_CASE("weight matrix and kernels") {
  Eigen::MatrixXd d(1, 3);
  d << 0.0, 12.0, 97.0;
  const Eigen::MatrixXd w = weight_matrix(d, 0.40, 96.0, DecayKernel::Exponential);
  CHECK(w(0, 0) == 1.0);
  CHECK(w(0, 1) == doctest::Approx(0.00822974704902003).epsilon(1e-12));
  CHECK(w(0, 1) < 0.01);  // under 1% of the maximum one foot away
  CHECK(weight_matrix(d, 0.5, 96.0, DecayKernel::Exponential)(0, 2) == 0.0);

  CHECK_THROWS_AS(weight_matrix(d, 0.5, 96.0, DecayKernel::Power), ValidationError);
  CHECK_THROWS_AS(weight_matrix(d, 0.0, 96.0, DecayKernel::Exponential), ValidationError);

  Eigen::MatrixXd g(1, 2);
  g << 0.0, 2.0;
  const Eigen::MatrixXd wg = weight_matrix(g, 0.25, 96.0, DecayKernel::Gaussian);
  CHECK(wg(0, 0) == 1.0);
  CHECK(wg(0, 1) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("property: kernels are non-increasing in distance") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(1e-3, 96.0), beta(0.01, 3.0);
  for (DecayKernel k : {DecayKernel::Exponential, DecayKernel::Power, DecayKernel::Gaussian}) {
    for (int t = 0; t < 2000; ++t) {
      double d1 = dist(rng), d2 = dist(rng);
      if (d1 > d2) std::swap(d1, d2);
      const double b = beta(rng);
      CHECK(decay(k, d1, b, 96.0) >= decay(k, d2, b, 96.0));
    }
  }
}

TEST_CASE("property: exponential weights invariant to unit rescaling") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 100.0), scale(0.1, 10.0);
  Eigen::MatrixXd d(6, 4);
  for (int t = 0; t < 50; ++t) {
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = dist(rng);
    const double s = scale(rng);
    const Eigen::MatrixXd a = weight_matrix(d, 0.5, 60.0, DecayKernel::Exponential);
    const Eigen::MatrixXd b = weight_matrix(d * s, 0.5 / s, 60.0 * s, DecayKernel::Exponential);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      // Distances landing exactly on the cutoff after rescaling are measure-zero.
      CHECK(a(i) == doctest::Approx(b(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("knot effects") {
  std::vector<Knot> knots{{0, 0, 10.0, false}, {0, 0, 4.0, true}};
  const Eigen::VectorXd e = knot_effect_vector(knots, 0.25, 0.15);
  CHECK(e(0) == doctest::Approx(2.5));
  CHECK(e(1) == doctest::Approx(0.6));
  CHECK(knot_effect_vector({}, 0.25, 0.15).size() == 0);
  std::vector<Knot> zero{{0, 0, 0.0, true}, {0, 0, 0.0, false}};
  CHECK(knot_effect_vector(zero, 0.25, 0.15).isZero());
}

TEST_CASE("adjust strength") {
  Eigen::VectorXd x(2);
  x << 5, 5;
  Eigen::MatrixXd w(2, 1);
  w << 1, 0;
  Eigen::VectorXd e(1);
  e << 2.5;
  const Eigen::VectorXd y = adjust_strength(x, w, e);
  CHECK(y(0) == 2.5);
  CHECK(y(1) == 5.0);
  CHECK(adjust_strength(x, Eigen::MatrixXd(2, 0), Eigen::VectorXd(0)) == x);
  CHECK(adjust_strength(x, Eigen::MatrixXd::Zero(2, 1), e) == x);
  CHECK_THROWS_AS(adjust_strength(x, Eigen::MatrixXd(3, 1), e), ValidationError);
}

TEST_CASE("observed strength takes the minimum, lowest index on ties") {
  Eigen::VectorXd y(3);
  y << 3, 1, 2;
  auto o = observed_strength(y);
  CHECK(o.strength == 1.0);
  CHECK(o.cell == 2);
  Eigen::VectorXd tie(2);
  tie << 2, 2;
  o = observed_strength(tie);
  CHECK(o.strength == 2.0);
  CHECK(o.cell == 1);
  CHECK_THROWS_AS(observed_strength(Eigen::VectorXd(0)), ValidationError);
}

TEST_CASE("property: argmin shift invariance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(5.0, 1.0), c(0.0, 10.0);
  for (int t = 0; t < 500; ++t) {
    Eigen::VectorXd y(24);
    for (auto& v : y) v = n(rng);
    const double shift = c(rng);
    const auto a = observed_strength(y);
    const auto b = observed_strength((y.array() + shift).matrix());
    CHECK(b.cell == a.cell);
    CHECK(b.strength == doctest::Approx(a.strength + shift).epsilon(1e-12));
  }
}

TEST_CASE("property: removing a knot never lowers any cell strength") {
  std::mt19937_64 rng(5);
  const CellGrid g = paper_grid();
  const ModelParams th = kReferenceTruth;
  std::normal_distribution<double> n(5.85, 1.0);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(24);
    for (auto& v : x) v = n(rng);
    auto knots = random_knots(rng, g, 1 + static_cast<int>(rng() % 6));
    const Eigen::VectorXd with = adjusted_profile(x, g, knots, th, DecayKernel::Exponential);
    const std::size_t drop = rng() % knots.size();
    const Knot removed = knots[drop];
    knots.erase(knots.begin() + static_cast<std::ptrdiff_t>(drop));
    const Eigen::VectorXd without = adjusted_profile(x, g, knots, th, DecayKernel::Exponential);
    const auto centroids = cell_centroids(g);
    for (int j = 0; j < 24; ++j) {
      CHECK(without(j) >= with(j));
      const double d = std::hypot(centroids[j].x - removed.lx, centroids[j].y - removed.ly);
      if (d <= 20.0 && removed.volume > 1e-6) CHECK(without(j) > with(j));
    }
  }
}

TEST_CASE("property: swapping gammas and flipping edge flags leaves Y unchanged") {
  std::mt19937_64 rng(9);
  const CellGrid g = paper_grid();
  std::normal_distribution<double> n(5.85, 1.0);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(24);
    for (auto& v : x) v = n(rng);
    auto knots = random_knots(rng, g, static_cast<int>(rng() % 8));
    ModelParams th = kReferenceTruth;
    const Eigen::VectorXd a = adjusted_profile(x, g, knots, th, DecayKernel::Exponential);
    std::swap(th.gamma0, th.gamma1);
    for (auto& k : knots) k.edge = !k.edge;
    const Eigen::VectorXd b = adjusted_profile(x, g, knots, th, DecayKernel::Exponential);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("observation of a clear specimen is the minimum of X") {
  Eigen::VectorXd x(5);
  x << 4, 3.5, 6, 3.2, 7;
  const auto y = adjusted_profile(x, {5, 20.0, 5.5, 96.0}, {}, kReferenceTruth,
                                  DecayKernel::Exponential);
  CHECK(observed_strength(y).strength == x.minCoeff());
}

TEST_CASE("specimen validation") {
  const CellGrid g = paper_grid();
  Specimen s{"A", 1.9, {}, 2.5, 3};
  CHECK_NOTHROW(s.validate(g));
  s.failure_cell = 25;
  CHECK_THROWS_AS(s.validate(g), ValidationError);
  s.failure_cell.reset();
  CHECK_THROWS_AS(s.validate(g), ValidationError);  // uts without cell
  s.uts.reset();
  CHECK_NOTHROW(s.validate(g));
  s.knots.push_back({120.0, 1.0, 3.0, false});  // gripped region: kept
  CHECK_NOTHROW(s.validate(g));
  s.knots.push_back({10.0, 1.0, -1.0, false});
  CHECK_THROWS_AS(s.validate(g), ValidationError);
}
