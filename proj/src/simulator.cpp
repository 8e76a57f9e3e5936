#include "lumber/simulator.hpp"

#include <cstdio>

#include "lumber/ar1.hpp"
#include "lumber/errors.hpp"
#include "lumber/model.hpp"

namespace lumber {

void SimConfig::validate() const {
  grid.validate();
  truth.validate();
  if (n < 1) throw ValidationError("simulate: n must be >= 1");
  if (!(lambda > 0.0)) throw ValidationError("simulate: lambda must be > 0");
  if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw ValidationError("simulate: p_edge outside [0, 1]");
  if (!(volume_shape > 0.0 && volume_scale > 0.0)) {
    throw ValidationError("simulate: gamma shape and scale must be > 0");
  }
  if (!(moe_sd > 0.0)) throw ValidationError("simulate: moe_sd must be > 0");
}

SimulatedSpecimen generate_specimen(Rng& rng, const SimConfig& cfg, std::string id) {
  const ModelParams& th = cfg.truth;
  SimulatedSpecimen out;
  Specimen& s = out.specimen;
  s.id = std::move(id);

  s.moe = std::normal_distribution<double>(cfg.moe_mean, cfg.moe_sd)(rng);
  const Eigen::VectorXd clear =
      ar1_sample(rng, th.mean_strength(s.moe), th.rho, th.sigma, cfg.grid.cells);

  const double area = cfg.grid.span_length * cfg.grid.width;
  const int count = std::poisson_distribution<int>(cfg.lambda * area)(rng);
  std::uniform_real_distribution<double> along(0.0, cfg.grid.span_length);
  std::uniform_real_distribution<double> across(0.0, cfg.grid.width);
  s.knots.resize(static_cast<std::size_t>(count));
  for (Knot& k : s.knots) {
    k.lx = along(rng);
    k.ly = across(rng);
  }
  std::bernoulli_distribution edge(cfg.p_edge);
  for (Knot& k : s.knots) k.edge = edge(rng);
  std::gamma_distribution<double> volume(cfg.volume_shape, cfg.volume_scale);
  for (Knot& k : s.knots) k.volume = volume(rng);

  const Eigen::VectorXd adjusted = adjusted_profile(clear, cfg.grid, s.knots, th, cfg.kernel);
  const Observation obs = observed_strength(adjusted);
  s.uts = obs.strength;
  s.failure_cell = obs.cell;
  out.truth = {s.id, clear, adjusted};
  return out;
}

SimulatedDataset generate_dataset(const SimConfig& cfg) {
  cfg.validate();
  SimulatedDataset out;
  out.specimens.resize(static_cast<std::size_t>(cfg.n));
  out.truth.resize(static_cast<std::size_t>(cfg.n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < cfg.n; ++i) {
    Rng rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(i)});
    char id[32];
    std::snprintf(id, sizeof id, "S%04d", i + 1);
    SimulatedSpecimen sim = generate_specimen(rng, cfg, id);
    out.specimens[static_cast<std::size_t>(i)] = std::move(sim.specimen);
    out.truth[static_cast<std::size_t>(i)] = std::move(sim.truth);
  }
  return out;
}

}  // namespace lumber
