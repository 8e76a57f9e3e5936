#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "lumber/errors.hpp"
#include "lumber/evaluation.hpp"

namespace lumber {

OlsFit ols_fit(const Eigen::MatrixXd& predictors, const Eigen::VectorXd& response) {
  const auto n = static_cast<std::size_t>(predictors.rows());
  const auto p = static_cast<std::size_t>(predictors.cols());
  if (static_cast<std::size_t>(response.size()) != n) {
    throw ValidationError("ols: response length does not match design rows");
  }
  if (n <= p + 1) throw ValidationError("ols: need n > p + 1 observations");

  Eigen::MatrixXd x(n, p + 1);
  x.col(0).setOnes();
  x.rightCols(static_cast<Eigen::Index>(p)) = predictors;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < static_cast<Eigen::Index>(p + 1)) throw ValidationError("ols: singular design");

  OlsFit fit;
  fit.n = n;
  fit.predictors = p;
  fit.coefficients = qr.solve(response);
  const Eigen::VectorXd resid = response - x * fit.coefficients;
  fit.rss = resid.squaredNorm();
  fit.residual_variance = fit.rss / static_cast<double>(n - p - 1);
  fit.xtx_inverse = (x.transpose() * x).ldlt().solve(
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p + 1), static_cast<Eigen::Index>(p + 1)));
  return fit;
}

Interval ols_predict_interval(const OlsFit& fit, const Eigen::VectorXd& point, double level) {
  if (static_cast<std::size_t>(point.size()) != fit.predictors) {
    throw ValidationError("ols: prediction point has wrong dimension");
  }
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("ols: level must lie in (0, 1)");
  Eigen::VectorXd x(point.size() + 1);
  x(0) = 1.0;
  x.tail(point.size()) = point;
  const double mean = x.dot(fit.coefficients);
  const boost::math::students_t dist(static_cast<double>(fit.n - fit.predictors - 1));
  const double t = boost::math::quantile(dist, 0.5 + 0.5 * level);
  const double half =
      t * std::sqrt(fit.residual_variance * (1.0 + x.dot(fit.xtx_inverse * x)));
  return {mean, mean - half, mean + half};
}

}  // namespace lumber
