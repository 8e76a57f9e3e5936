#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lumber/rng.hpp"
#include "lumber/types.hpp"

namespace lumber {

struct SimConfig {
  int n = 120;
  CellGrid grid{};
  ModelParams truth = kReferenceTruth;
  DecayKernel kernel = DecayKernel::Exponential;
  double lambda = 0.01;  ///< knots per square inch of wide face
  double p_edge = 0.6;
  double volume_shape = 2.0;
  double volume_scale = 6.0;
  double moe_mean = 1.9;
  double moe_sd = 0.25;
  std::uint64_t seed = 20210601;

  void validate() const;
};

/// Ground-truth clear (X) and adjusted (Y) profiles of one simulated specimen.
struct TruthRecord {
  std::string id;
  Eigen::VectorXd clear;
  Eigen::VectorXd adjusted;
};

struct SimulatedSpecimen {
  Specimen specimen;
  TruthRecord truth;
};

/// Covariate, AR(1) clear strengths, Poisson knot field on the test span,
/// Bernoulli edge flags, gamma volumes, adjusted strengths, then the
/// destructive test (minimum and its cell).
SimulatedSpecimen generate_specimen(Rng& rng, const SimConfig& cfg, std::string id);

struct SimulatedDataset {
  std::vector<Specimen> specimens;
  std::vector<TruthRecord> truth;
};

/// `cfg.n` independent specimens; specimen i draws from make_stream(seed, {i}).
SimulatedDataset generate_dataset(const SimConfig& cfg);

}  // namespace lumber
