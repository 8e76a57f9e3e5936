#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lumber {

/// Longitudinal partition of the test span into equal cells.
///
/// Units: inches. Cell centroids sit on the wide-face centre line.
struct CellGrid {
  int cells = 24;
  double span_length = 96.0;
  double width = 5.5;
  double d_max = 96.0;

  void validate() const;
  double cell_length() const { return span_length / cells; }
};

/// A knot reduced to its planar centroid on the wide face, displaced volume
/// (cubic inches) and edge flag. `lx` is measured from the start of the test
/// span and may fall outside it.
struct Knot {
  double lx = 0.0;
  double ly = 0.0;
  double volume = 0.0;
  bool edge = false;

  friend bool operator==(const Knot&, const Knot&) = default;
};

/// One board. Strengths are in psi x 1e3, MOE in psi x 1e6.
/// `failure_cell` is 1-based.
struct Specimen {
  std::string id;
  double moe = 0.0;
  std::vector<Knot> knots;
  std::optional<double> uts;
  std::optional<int> failure_cell;

  bool observed() const { return uts.has_value() && failure_cell.has_value(); }
  void validate(const CellGrid& grid) const;

  friend bool operator==(const Specimen&, const Specimen&) = default;
};

/// Model parameters on the constrained scale.
struct ModelParams {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double rho = 0.5;
  double sigma = 1.0;
  double beta = 1.0;
  double gamma0 = 1.0;
  double gamma1 = 1.0;

  static constexpr std::size_t kCount = 7;
  static constexpr std::array<std::string_view, kCount> kNames = {
      "eta0", "eta1", "rho", "sigma", "beta", "gamma0", "gamma1"};

  std::array<double, kCount> to_array() const {
    return {eta0, eta1, rho, sigma, beta, gamma0, gamma1};
  }
  static ModelParams from_array(const std::array<double, kCount>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }

  bool satisfies_constraints() const;
  void validate() const;

  /// Stationary mean of the clear-wood process for a given MOE.
  double mean_strength(double moe) const { return eta0 + eta1 * moe; }
};

/// Truth values used by the simulation study.
inline constexpr ModelParams kReferenceTruth{3.0, 1.5, 0.7, 0.8, 0.5, 0.25, 0.15};

enum class DecayKernel { Exponential, Power, Gaussian };

DecayKernel parse_kernel(std::string_view name);
std::string_view kernel_name(DecayKernel kernel);

}  // namespace lumber
