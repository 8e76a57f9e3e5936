#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "lumber/density.hpp"
#include "lumber/rng.hpp"

namespace lumber {

struct HmcConfig {
  int chains = 4;
  int iterations = 10000;  ///< total per chain, warmup included
  int warmup = 5000;
  double target_accept = 0.8;
  int max_leapfrog_steps = 1024;
  std::uint64_t seed = 20210601;
  bool adapt_mass = true;

  void validate() const;
  int retained() const { return iterations - warmup; }
};

/// Position, log density and gradient at that position.
struct PhasePoint {
  Eigen::VectorXd z;
  double log_density = 0.0;
  Eigen::VectorXd grad;
};

PhasePoint make_phase_point(const LogDensity& target, Eigen::VectorXd z);

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Leapfrog with unit mass: p += h/2 g; z += h p; p += h/2 g, repeated.
std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(Eigen::VectorXd z, Eigen::VectorXd p,
                                                     double step_size, int n_steps,
                                                     const GradientFn& gradient);

/// In-place leapfrog against a target with diagonal inverse metric. Returns
/// false as soon as the trajectory leaves the finite region (divergent).
bool leapfrog(PhasePoint& point, Eigen::VectorXd& p, double step_size, int n_steps,
              const LogDensity& target, const Eigen::VectorXd& inv_metric);

double kinetic_energy(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_metric);

/// Integrator settings frozen after warmup.
struct HmcKernel {
  double step_size = 0.1;
  int max_steps = 10;  ///< trajectory length is uniform on [1, max_steps]
  Eigen::VectorXd inv_metric;
};

struct Transition {
  bool accepted = false;
  bool divergent = false;
  double accept_stat = 0.0;
  double energy_error = 0.0;
  int steps = 0;
};

inline constexpr double kDivergenceThreshold = 1000.0;

/// One Metropolis-corrected HMC transition.
Transition hmc_iterate(PhasePoint& state, const LogDensity& target, const HmcKernel& kernel,
                       Rng& rng);

/// Dual-averaging step-size adaptation.
class DualAveraging {
 public:
  explicit DualAveraging(double target_accept, double gamma = 0.05, double t0 = 10.0,
                         double kappa = 0.75)
      : delta_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void restart(double step_size);
  /// Feed one accept statistic; returns the step size to use next.
  double update(double accept_stat);
  double final_step_size() const;

 private:
  double delta_, gamma_, t0_, kappa_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  int counter_ = 0;
};

/// Slow (metric) adaptation windows inside warmup: a fast initial buffer,
/// doubling windows, then a terminal step-size-only buffer of at least
/// `term_fraction` of warmup so the final step size has time to settle.
struct WarmupSchedule {
  int init_buffer = 75;
  int term_buffer = 50;
  int base_window = 25;
  double term_fraction = 0.15;

  struct Window {
    int begin;
    int end;  ///< exclusive
  };
  std::vector<Window> windows(int warmup) const;
};

/// Regularized variance estimate over one window, floored at 1e-10.
Eigen::VectorXd estimate_inv_metric(const Eigen::MatrixXd& window_draws);

/// Double/halve the step size until one-step acceptance crosses 0.8.
double find_initial_step_size(const PhasePoint& state, const LogDensity& target,
                              const Eigen::VectorXd& inv_metric, double step_size, Rng& rng);

/// Mean leapfrog count until the trajectory turns back on itself, over
/// `probes` fresh momenta (capped at `max_steps`).
double mean_uturn_steps(const PhasePoint& state, const LogDensity& target,
                        const Eigen::VectorXd& inv_metric, double step_size, int max_steps,
                        int probes, Rng& rng);

/// Warmup for one chain. Advances `state` through every warmup iteration.
HmcKernel adapt_warmup(PhasePoint& state, const LogDensity& target, const HmcConfig& config,
                       const WarmupSchedule& schedule, Rng& rng);

/// Maps an unconstrained state (and its log density) to the row stored per draw.
using DrawMapper = std::function<Eigen::VectorXd(const Eigen::VectorXd& z, double log_density)>;
using Initializer = std::function<Eigen::VectorXd(Rng&)>;

struct ChainResult {
  Eigen::MatrixXd draws;  ///< retained iterations x mapped width
  Eigen::VectorXd log_density;
  double mean_accept = 0.0;
  int divergences = 0;
  HmcKernel kernel;
};

/// Run one chain (warmup + sampling) on stream make_stream(seed, {chain}).
ChainResult run_chain(const LogDensity& target, const HmcConfig& config, int chain,
                      const Initializer& init, const DrawMapper& mapper,
                      const WarmupSchedule& schedule = {});

/// All chains, one per OpenMP worker. Output is independent of thread count.
std::vector<ChainResult> run_chains(const LogDensity& target, const HmcConfig& config,
                                    const Initializer& init, const DrawMapper& mapper,
                                    const WarmupSchedule& schedule = {});

}  // namespace lumber
