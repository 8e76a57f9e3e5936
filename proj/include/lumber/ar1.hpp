#pragma once

#include <Eigen/Dense>

#include "lumber/rng.hpp"

namespace lumber {

/// Stationary AR(1) draw of length `cells` with marginal mean `mu`, marginal
/// variance sigma^2 / (1 - rho^2) and innovation sd `sigma`.
Eigen::VectorXd ar1_sample(Rng& rng, double mu, double rho, double sigma, int cells);

/// Sequential (conditional) log-density of a stationary AR(1) vector.
/// Throws NumericalError on non-finite input.
double ar1_logpdf(const Eigen::VectorXd& x, double mu, double rho, double sigma);

}  // namespace lumber
