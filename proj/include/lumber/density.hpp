#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace lumber {

/// A log-density on R^d with its gradient, as consumed by the sampler.
///
/// Implementations must not throw from log_density_gradient; a non-finite
/// return value marks the point as outside the usable support.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual std::size_t dim() const = 0;
  virtual double log_density_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const = 0;
};

}  // namespace lumber
