#include "lumber/model.hpp"

#include <cmath>
#include <string>

#include "lumber/errors.hpp"

namespace lumber {

void CellGrid::validate() const {
  if (cells < 1) throw ValidationError("grid: cells must be >= 1");
  if (!(span_length > 0.0)) throw ValidationError("grid: span_length must be > 0");
  if (!(width > 0.0)) throw ValidationError("grid: width must be > 0");
  if (!(d_max > 0.0)) throw ValidationError("grid: d_max must be > 0");
}

void Specimen::validate(const CellGrid& grid) const {
  if (id.empty()) throw ValidationError("specimen with empty id");
  if (!std::isfinite(moe)) throw ValidationError("specimen " + id + ": non-finite moe");
  if (uts.has_value() != failure_cell.has_value()) {
    throw ValidationError("specimen " + id + ": uts and failure_cell must be given together");
  }
  if (uts) {
    // Not required to be positive: the Gaussian model puts mass below zero.
    if (!std::isfinite(*uts)) {
      throw ValidationError("specimen " + id + ": non-finite uts");
    }
    if (*failure_cell < 1 || *failure_cell > grid.cells) {
      throw ValidationError("specimen " + id + ": failure_cell " + std::to_string(*failure_cell) +
                            " outside 1.." + std::to_string(grid.cells));
    }
  }
  for (const Knot& k : knots) {
    if (!(std::isfinite(k.lx) && std::isfinite(k.ly) && std::isfinite(k.volume))) {
      throw ValidationError("specimen " + id + ": non-finite knot field");
    }
    if (k.volume < 0.0) throw ValidationError("specimen " + id + ": negative knot volume");
    if (k.ly < 0.0 || k.ly > grid.width) {
      throw ValidationError("specimen " + id + ": knot ly outside [0, width]");
    }
  }
}

bool ModelParams::satisfies_constraints() const {
  return std::isfinite(eta0) && std::isfinite(eta1) && rho > 0.0 && rho < 1.0 && sigma > 0.0 &&
         beta > 0.0 && gamma0 > 0.0 && gamma1 > 0.0 && std::isfinite(sigma) &&
         std::isfinite(beta) && std::isfinite(gamma0) && std::isfinite(gamma1);
}

void ModelParams::validate() const {
  if (!satisfies_constraints()) {
    throw ValidationError("parameters violate constraints (0<rho<1; sigma, beta, gammas > 0)");
  }
}

DecayKernel parse_kernel(std::string_view name) {
  if (name == "exponential") return DecayKernel::Exponential;
  if (name == "power") return DecayKernel::Power;
  if (name == "gaussian") return DecayKernel::Gaussian;
  throw ValidationError("unknown decay kernel '" + std::string(name) + "'");
}

std::string_view kernel_name(DecayKernel kernel) {
  switch (kernel) {
    case DecayKernel::Exponential: return "exponential";
    case DecayKernel::Power: return "power";
    case DecayKernel::Gaussian: return "gaussian";
  }
  return "exponential";
}

std::vector<Point> cell_centroids(const CellGrid& grid) {
  grid.validate();
  std::vector<Point> out(static_cast<std::size_t>(grid.cells));
  const double len = grid.cell_length();
  for (int j = 0; j < grid.cells; ++j) {
    out[static_cast<std::size_t>(j)] = {(j + 0.5) * len, grid.width / 2.0};
  }
  return out;
}

Eigen::MatrixXd distance_matrix(const CellGrid& grid, std::span<const Knot> knots) {
  const auto centroids = cell_centroids(grid);
  Eigen::MatrixXd d(grid.cells, static_cast<Eigen::Index>(knots.size()));
  for (Eigen::Index k = 0; k < d.cols(); ++k) {
    const Knot& knot = knots[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < d.rows(); ++j) {
      const Point& c = centroids[static_cast<std::size_t>(j)];
      d(j, k) = std::hypot(c.x - knot.lx, c.y - knot.ly);
    }
  }
  return d;
}

double decay(DecayKernel kernel, double d, double beta, double d_max) {
  if (d > d_max) return 0.0;
  switch (kernel) {
    case DecayKernel::Exponential: return std::exp(-beta * d);
    case DecayKernel::Gaussian: return std::exp(-beta * d * d);
    case DecayKernel::Power:
      if (!(d > 0.0)) throw ValidationError("power kernel is singular at zero distance");
      return std::pow(d, -beta);
  }
  return 0.0;
}

double decay_dbeta(DecayKernel kernel, double d, double beta, double d_max) {
  if (d > d_max) return 0.0;
  switch (kernel) {
    case DecayKernel::Exponential: return -d * std::exp(-beta * d);
    case DecayKernel::Gaussian: return -d * d * std::exp(-beta * d * d);
    case DecayKernel::Power:
      if (!(d > 0.0)) throw ValidationError("power kernel is singular at zero distance");
      return -std::log(d) * std::pow(d, -beta);
  }
  return 0.0;
}

Eigen::MatrixXd weight_matrix(const Eigen::MatrixXd& distances, double beta, double d_max,
                              DecayKernel kernel) {
  if (!(beta > 0.0)) throw ValidationError("weight_matrix: beta must be > 0");
  return distances.unaryExpr([&](double d) { return decay(kernel, d, beta, d_max); });
}

Eigen::VectorXd knot_effect_vector(std::span<const Knot> knots, double gamma0, double gamma1) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(knots.size()));
  for (std::size_t k = 0; k < knots.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = (knots[k].edge ? gamma1 : gamma0) * knots[k].volume;
  }
  return out;
}

Eigen::VectorXd adjust_strength(const Eigen::VectorXd& clear, const Eigen::MatrixXd& weights,
                                const Eigen::VectorXd& effects) {
  if (weights.rows() != clear.size() || weights.cols() != effects.size()) {
    throw ValidationError("adjust_strength: dimension mismatch");
  }
  if (effects.size() == 0) return clear;
  return clear - weights * effects;
}

Observation observed_strength(const Eigen::VectorXd& adjusted) {
  if (adjusted.size() == 0) throw ValidationError("observed_strength: empty profile");
  Eigen::Index m = 0;
  for (Eigen::Index j = 1; j < adjusted.size(); ++j) {
    if (adjusted(j) < adjusted(m)) m = j;
  }
  return {adjusted(m), static_cast<int>(m) + 1};
}

Eigen::VectorXd adjusted_profile(const Eigen::VectorXd& clear, const CellGrid& grid,
                                 std::span<const Knot> knots, const ModelParams& params,
                                 DecayKernel kernel) {
  const Eigen::MatrixXd w =
      weight_matrix(distance_matrix(grid, knots), params.beta, grid.d_max, kernel);
  return adjust_strength(clear, w, knot_effect_vector(knots, params.gamma0, params.gamma1));
}

}  // namespace lumber
