#include "lumber/ar1.hpp"

#include <cmath>

#include "lumber/errors.hpp"

namespace lumber {

Eigen::VectorXd ar1_sample(Rng& rng, double mu, double rho, double sigma, int cells) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(cells);
  if (cells == 0) return x;
  x(0) = mu + sigma / std::sqrt(1.0 - rho * rho) * normal(rng);
  const double drift = (1.0 - rho) * mu;
  for (int j = 1; j < cells; ++j) {
    x(j) = drift + rho * x(j - 1) + sigma * normal(rng);
  }
  return x;
}

double ar1_logpdf(const Eigen::VectorXd& x, double mu, double rho, double sigma) {
  if (!x.allFinite() || !std::isfinite(mu) || !std::isfinite(rho) || !std::isfinite(sigma)) {
    throw NumericalError("ar1_logpdf: non-finite input");
  }
  constexpr double half_log_2pi = 0.9189385332046727418;
  const double one_minus_rho2 = 1.0 - rho * rho;
  const double a0 = x(0) - mu;
  double quad = one_minus_rho2 * a0 * a0;
  for (Eigen::Index j = 1; j < x.size(); ++j) {
    const double e = (x(j) - mu) - rho * (x(j - 1) - mu);
    quad += e * e;
  }
  const auto n = static_cast<double>(x.size());
  return -n * (half_log_2pi + std::log(sigma)) + 0.5 * std::log(one_minus_rho2) -
         0.5 * quad / (sigma * sigma);
}

}  // namespace lumber
