#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lumber/types.hpp"

namespace lumber {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Centroid j (0-based here) is at ((j + 1/2) * span / J, width / 2).
std::vector<Point> cell_centroids(const CellGrid& grid);

/// J x K matrix of Euclidean distances from cell centroids to knot centroids.
Eigen::MatrixXd distance_matrix(const CellGrid& grid, std::span<const Knot> knots);

/// h(d) for a single distance. Throws ValidationError for the power kernel at d = 0.
double decay(DecayKernel kernel, double d, double beta, double d_max);

/// dh/dbeta at fixed d.
double decay_dbeta(DecayKernel kernel, double d, double beta, double d_max);

Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& distances, double beta, double d_max,
                              DecayKernel kernel);

/// Per-knot strength reduction per unit weight: (edge ? gamma1 : gamma0) * volume.
Eigen::VectorXd knot_effect_vector(std::span<const Knot> knots, double gamma0, double gamma1);

/// Y = X - W * effects.
Eigen::VectorXd adjust_strength(const Eigen::VectorXd& clear, const Eigen::MatrixXd& weights,
                                const Eigen::VectorXd& effects);

struct Observation {
  double strength = 0.0;
  int cell = 1;  ///< 1-based; lowest index wins ties
};

Observation observed_strength(const Eigen::VectorXd& adjusted);

/// Convenience: Y for a specimen under the given parameters and clear-wood profile.
Eigen::VectorXd adjusted_profile(const Eigen::VectorXd& clear, const CellGrid& grid,
                                 std::span<const Knot> knots, const ModelParams& params,
                                 DecayKernel kernel);

}  // namespace lumber
