#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lumber/density.hpp"
#include "lumber/rng.hpp"
#include "lumber/types.hpp"

namespace lumber {

/// Weakly informative priors. eta ~ N(0, sd_eta^2); rho ~ N(rho_loc,
/// rho_scale^2) truncated to (0,1); beta, gamma0, gamma1 ~ half-N(0, s^2);
/// sigma ~ half-Cauchy(0, cauchy_scale).
struct PriorSpec {
  double sd_eta = 10.0;
  double rho_loc = 0.5;
  double rho_scale = 0.5;
  double half_normal_scale = 1.0;
  double cauchy_scale = 5.0;

  void validate() const;
};

/// Constrained-space log prior with parameter-free normalizers dropped.
double log_prior(const ModelParams& params, const PriorSpec& prior);

/// The J-1 unobserved cell strengths of one specimen, in cell order with the
/// failure cell removed.
struct LatentBlock {
  std::size_t specimen_index = 0;
  Eigen::VectorXd y_minus_obs;
};

/// Full adjusted-strength profile with the observed value reinserted at the failure cell.
Eigen::VectorXd assemble_profile(const Specimen& specimen, const Eigen::VectorXd& y_minus_obs);

/// Sum over specimens of the AR(1) log-density of X = Y + W * effects.
double augmented_loglik(const ModelParams& params, std::span<const Specimen> specimens,
                        std::span<const LatentBlock> latents, const CellGrid& grid,
                        DecayKernel kernel);

enum class Jacobian { Include, Exclude };

/// Augmented posterior on the unconstrained scale
///   z = [eta0, eta1, logit rho, log sigma, log beta, log gamma0, log gamma1, w...]
/// with one w per non-failure cell of every specimen. The clear-wood profile is
/// written through standardized AR(1) innovations,
///   v_j = (X_j - mu) / tau,  tau = sigma / sqrt(1 - rho^2),
///   v_1 = xi_1,  v_j = rho v_{j-1} + sqrt(1 - rho^2) xi_j,
/// and each latent innovation is xi_j = b_j + softplus(w_j - b_j), where b_j is
/// the value of xi_j that puts Y_j exactly at the observed strength. The
/// failure cell's innovation is pinned to its bound. Far above the bound
/// w_j ~ N(0, 1) whatever theta is, which keeps the latents from dragging on
/// (rho, sigma) the way a log(Y - uts) coordinate does.
class PosteriorModel final : public LogDensity {
 public:
  static constexpr std::size_t kNumParams = ModelParams::kCount;

  PosteriorModel(std::vector<Specimen> specimens, CellGrid grid,
                 DecayKernel kernel = DecayKernel::Exponential, PriorSpec prior = {});

  std::size_t dim() const override { return dim_; }
  std::size_t num_specimens() const { return specimens_.size(); }
  const std::vector<Specimen>& specimens() const { return specimens_; }
  const CellGrid& grid() const { return grid_; }
  DecayKernel kernel() const { return kernel_; }
  const PriorSpec& prior() const { return prior_; }

  /// Index of the first latent coordinate of specimen i.
  std::size_t latent_offset(std::size_t i) const;

  Eigen::VectorXd transform(const ModelParams& params, std::span<const LatentBlock> latents) const;
  ModelParams params_from(const Eigen::VectorXd& z) const;
  std::vector<LatentBlock> latents_from(const Eigen::VectorXd& z) const;

  /// log sigma + log beta + log gamma0 + log gamma1 + log rho + log(1-rho)
  /// plus log |dY/dw| of the latent map.
  double jacobian_sum(const Eigen::VectorXd& z) const;

  /// Serial reference assembled from the core-model operations.
  double log_posterior_reference(const Eigen::VectorXd& z,
                                 Jacobian jacobian = Jacobian::Include) const;

  /// Fused value + gradient kernel, OpenMP-parallel over specimens. Per-specimen
  /// partials are reduced in index order so results do not depend on the
  /// thread count. Never throws; returns a non-finite value on failure.
  double log_density_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const override;

  /// Checked entry points. Throw NumericalError naming the offending coordinate.
  double log_posterior(const Eigen::VectorXd& z) const;
  Eigen::VectorXd grad_log_posterior(const Eigen::VectorXd& z) const;

  std::string coordinate_name(std::size_t k) const;

  /// Start inside the truncation region: Y = uts + |N(0.5, 0.1^2)|, theta at
  /// prior medians with rho = 0.5.
  Eigen::VectorXd initial_state(Rng& rng) const;

  /// 0 = OpenMP default.
  void set_num_threads(int n) { num_threads_ = n; }

 private:
  struct Prepared {
    Eigen::MatrixXd distances;  // J x K
    std::vector<double> volumes;
    std::vector<unsigned char> edge;
    double moe = 0.0;
    double uts = 0.0;
    int failure = 0;  // 0-based
  };

  struct LatentMap {
    Eigen::VectorXd y_minus_obs;
    double log_jacobian = 0.0;
  };
  /// W * effects for specimen i, via the core-model operations.
  Eigen::VectorXd knot_reduction(std::size_t i, const ModelParams& params) const;
  LatentMap map_latents(std::size_t i, const ModelParams& params, const double* w) const;

  std::vector<Specimen> specimens_;
  std::vector<Prepared> prepared_;
  CellGrid grid_;
  DecayKernel kernel_;
  PriorSpec prior_;
  std::size_t dim_ = 0;
  int num_threads_ = 0;
};

}  // namespace lumber
