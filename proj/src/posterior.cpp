#include "lumber/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <omp.h>

#include "lumber/ar1.hpp"
#include "lumber/errors.hpp"
#include "lumber/model.hpp"

namespace lumber {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727418;
constexpr double kHalfNormalMedian = 0.6744897501960817;  // Phi^{-1}(0.75)

// Partials gathered per specimen before the ordered reduction.
enum Partial : std::size_t { kLp, kMu, kRho, kSigma, kBeta, kGamma0, kGamma1, kPartialCount };

struct Constrained {
  double eta0, eta1, rho, one_minus_rho, sigma, beta, gamma0, gamma1;
  double log_rho, log_one_minus_rho;
};

Constrained constrain(const Eigen::VectorXd& z) {
  Constrained c{};
  c.eta0 = z(0);
  c.eta1 = z(1);
  const double t = z(2);
  // log rho = -log1p(e^-t), log(1-rho) = -log1p(e^t), evaluated stably.
  c.log_rho = t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
  c.log_one_minus_rho = t >= 0 ? -t - std::log1p(std::exp(-t)) : -std::log1p(std::exp(t));
  c.rho = std::exp(c.log_rho);
  c.one_minus_rho = std::exp(c.log_one_minus_rho);
  c.sigma = std::exp(z(3));
  c.beta = std::exp(z(4));
  c.gamma0 = std::exp(z(5));
  c.gamma1 = std::exp(z(6));
  return c;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Inverse of softplus for d > 0.
double softplus_inverse(double d) { return d + std::log(-std::expm1(-d)); }

inline void kernel_value_dbeta(DecayKernel kernel, double d, double beta, double d_max, double& h,
                               double& dh) {
  if (d > d_max) {
    h = 0.0;
    dh = 0.0;
    return;
  }
  switch (kernel) {
    case DecayKernel::Exponential:
      h = std::exp(-beta * d);
      dh = -d * h;
      return;
    case DecayKernel::Gaussian:
      h = std::exp(-beta * d * d);
      dh = -d * d * h;
      return;
    case DecayKernel::Power:
      h = std::pow(d, -beta);
      dh = -std::log(d) * h;
      return;
  }
}

struct Scratch {
  std::vector<double> lower, bound, t, sig, xi, v, rbar, w, dw, c, dc;
};

// Standardized AR(1) geometry shared by every map between Y and the latents.
struct Ar1Scale {
  double rho, s, tau;  // s = sqrt(1 - rho^2), tau = sigma / s
};

Ar1Scale ar1_scale(const ModelParams& p) {
  const double s = std::sqrt((1.0 - p.rho) * (1.0 + p.rho));
  return {p.rho, s, p.sigma / s};
}

}  // namespace

void PriorSpec::validate() const {
  if (!(sd_eta > 0 && rho_scale > 0 && half_normal_scale > 0 && cauchy_scale > 0)) {
    throw ValidationError("prior: all scales must be > 0");
  }
}

double log_prior(const ModelParams& p, const PriorSpec& prior) {
  auto sq = [](double v) { return v * v; };
  const double hn = prior.half_normal_scale;
  return -0.5 * sq(p.eta0 / prior.sd_eta) - 0.5 * sq(p.eta1 / prior.sd_eta) -
         0.5 * sq((p.rho - prior.rho_loc) / prior.rho_scale) -
         std::log1p(sq(p.sigma / prior.cauchy_scale)) - 0.5 * sq(p.beta / hn) -
         0.5 * sq(p.gamma0 / hn) - 0.5 * sq(p.gamma1 / hn);
}

Eigen::VectorXd assemble_profile(const Specimen& specimen, const Eigen::VectorXd& y_minus_obs) {
  if (!specimen.observed()) {
    throw ValidationError("specimen " + specimen.id + " has no observed uts/failure_cell");
  }
  const Eigen::Index cells = y_minus_obs.size() + 1;
  const Eigen::Index m = *specimen.failure_cell - 1;
  if (m < 0 || m >= cells) throw ValidationError("failure_cell out of range for latent block");
  Eigen::VectorXd y(cells);
  y.head(m) = y_minus_obs.head(m);
  y(m) = *specimen.uts;
  y.tail(cells - m - 1) = y_minus_obs.tail(cells - m - 1);
  return y;
}

double augmented_loglik(const ModelParams& params, std::span<const Specimen> specimens,
                        std::span<const LatentBlock> latents, const CellGrid& grid,
                        DecayKernel kernel) {
  double total = 0.0;
  for (const LatentBlock& block : latents) {
    const Specimen& s = specimens[block.specimen_index];
    const Eigen::VectorXd y = assemble_profile(s, block.y_minus_obs);
    if (y.size() != grid.cells) throw ValidationError("latent block length != cells - 1");
    const Eigen::MatrixXd w =
        weight_matrix(distance_matrix(grid, s.knots), params.beta, grid.d_max, kernel);
    const Eigen::VectorXd effects = knot_effect_vector(s.knots, params.gamma0, params.gamma1);
    Eigen::VectorXd x = y;
    if (effects.size() > 0) x += w * effects;
    total += ar1_logpdf(x, params.mean_strength(s.moe), params.rho, params.sigma);
  }
  return total;
}

PosteriorModel::PosteriorModel(std::vector<Specimen> specimens, CellGrid grid, DecayKernel kernel,
                               PriorSpec prior)
    : specimens_(std::move(specimens)), grid_(grid), kernel_(kernel), prior_(prior) {
  grid_.validate();
  prior_.validate();
  if (specimens_.empty()) throw ValidationError("posterior needs at least one specimen");
  prepared_.reserve(specimens_.size());
  for (const Specimen& s : specimens_) {
    s.validate(grid_);
    if (!s.observed()) {
      throw ValidationError("specimen " + s.id + " lacks uts/failure_cell; cannot enter the likelihood");
    }
    Prepared p;
    p.distances = distance_matrix(grid_, s.knots);
    if (kernel_ == DecayKernel::Power && (p.distances.array() <= 0.0).any()) {
      throw ValidationError("specimen " + s.id + ": power kernel is singular at zero distance");
    }
    for (const Knot& k : s.knots) {
      p.volumes.push_back(k.volume);
      p.edge.push_back(k.edge ? 1 : 0);
    }
    p.moe = s.moe;
    p.uts = *s.uts;
    p.failure = *s.failure_cell - 1;
    prepared_.push_back(std::move(p));
  }
  dim_ = kNumParams + specimens_.size() * static_cast<std::size_t>(grid_.cells - 1);
}

std::size_t PosteriorModel::latent_offset(std::size_t i) const {
  return kNumParams + i * static_cast<std::size_t>(grid_.cells - 1);
}

Eigen::VectorXd PosteriorModel::knot_reduction(std::size_t i, const ModelParams& params) const {
  const Specimen& s = specimens_[i];
  if (s.knots.empty()) return Eigen::VectorXd::Zero(grid_.cells);
  const Eigen::MatrixXd w =
      weight_matrix(prepared_[i].distances, params.beta, grid_.d_max, kernel_);
  return w * knot_effect_vector(s.knots, params.gamma0, params.gamma1);
}

PosteriorModel::LatentMap PosteriorModel::map_latents(std::size_t i, const ModelParams& params,
                                                      const double* w) const {
  const Prepared& p = prepared_[i];
  const Ar1Scale sc = ar1_scale(params);
  const Eigen::VectorXd r = knot_reduction(i, params);
  const double mu = params.mean_strength(p.moe);
  LatentMap out;
  out.y_minus_obs.resize(grid_.cells - 1);
  double prev = 0.0;
  for (int j = 0, q = 0; j < grid_.cells; ++j) {
    const double lower = (p.uts + r(j) - mu) / sc.tau;
    const double step = j == 0 ? 1.0 : sc.s;
    const double bound = j == 0 ? lower : (lower - sc.rho * prev) / sc.s;
    double excess = 0.0;
    if (j != p.failure) {
      const double t = w[q] - bound;
      excess = softplus(t);
      const double gap = sc.tau * step * excess;
      out.y_minus_obs(q) = p.uts + gap;
      out.log_jacobian += std::log(sc.tau * step) - softplus(-t);
      ++q;
    }
    prev = lower + step * excess;
  }
  return out;
}

Eigen::VectorXd PosteriorModel::transform(const ModelParams& params,
                                          std::span<const LatentBlock> latents) const {
  params.validate();
  if (latents.size() != specimens_.size()) {
    throw ValidationError("transform: need one latent block per specimen");
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
  z(0) = params.eta0;
  z(1) = params.eta1;
  z(2) = logit(params.rho);
  z(3) = std::log(params.sigma);
  z(4) = std::log(params.beta);
  z(5) = std::log(params.gamma0);
  z(6) = std::log(params.gamma1);
  const Ar1Scale sc = ar1_scale(params);
  for (const LatentBlock& block : latents) {
    const std::size_t i = block.specimen_index;
    if (i >= specimens_.size() || block.y_minus_obs.size() != grid_.cells - 1) {
      throw ValidationError("transform: malformed latent block");
    }
    const Prepared& p = prepared_[i];
    const Eigen::VectorXd r = knot_reduction(i, params);
    const double mu = params.mean_strength(p.moe);
    double prev = 0.0;
    for (int j = 0, q = 0; j < grid_.cells; ++j) {
      const double lower = (p.uts + r(j) - mu) / sc.tau;
      if (j == p.failure) {
        prev = lower;
        continue;
      }
      const double gap = block.y_minus_obs(q) - p.uts;
      if (!(gap > 0.0)) {
        throw ValidationError("latent for specimen " + specimens_[i].id +
                              " is not above the observed strength");
      }
      const double step = j == 0 ? 1.0 : sc.s;
      const double bound = j == 0 ? lower : (lower - sc.rho * prev) / sc.s;
      z(static_cast<Eigen::Index>(latent_offset(i)) + q) =
          bound + softplus_inverse(gap / (sc.tau * step));
      prev = lower + gap / sc.tau;
      ++q;
    }
  }
  return z;
}

ModelParams PosteriorModel::params_from(const Eigen::VectorXd& z) const {
  const Constrained c = constrain(z);
  return {c.eta0, c.eta1, c.rho, c.sigma, c.beta, c.gamma0, c.gamma1};
}

std::vector<LatentBlock> PosteriorModel::latents_from(const Eigen::VectorXd& z) const {
  const ModelParams params = params_from(z);
  std::vector<LatentBlock> out(specimens_.size());
  for (std::size_t i = 0; i < specimens_.size(); ++i) {
    out[i].specimen_index = i;
    out[i].y_minus_obs = map_latents(i, params, z.data() + latent_offset(i)).y_minus_obs;
  }
  return out;
}

double PosteriorModel::jacobian_sum(const Eigen::VectorXd& z) const {
  const Constrained c = constrain(z);
  const ModelParams params = params_from(z);
  double total = z(3) + z(4) + z(5) + z(6) + c.log_rho + c.log_one_minus_rho;
  for (std::size_t i = 0; i < specimens_.size(); ++i) {
    total += map_latents(i, params, z.data() + latent_offset(i)).log_jacobian;
  }
  return total;
}

double PosteriorModel::log_posterior_reference(const Eigen::VectorXd& z, Jacobian jacobian) const {
  const ModelParams params = params_from(z);
  const auto latents = latents_from(z);
  double lp = log_prior(params, prior_) +
              augmented_loglik(params, specimens_, latents, grid_, kernel_);
  if (jacobian == Jacobian::Include) lp += jacobian_sum(z);
  return lp;
}

double PosteriorModel::log_density_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
  grad.setZero(static_cast<Eigen::Index>(dim_));
  const Constrained th = constrain(z);
  const double rho = th.rho;
  const double sd = std::sqrt(th.one_minus_rho * (1.0 + rho));
  const double tau = th.sigma / sd;
  const int cells = grid_.cells;
  const auto n = static_cast<std::ptrdiff_t>(prepared_.size());

  std::vector<double> partials(static_cast<std::size_t>(n) * kPartialCount, 0.0);
  const int threads = num_threads_ > 0 ? num_threads_ : omp_get_max_threads();

#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    thread_local Scratch s;
    const Prepared& p = prepared_[static_cast<std::size_t>(i)];
    const auto K = static_cast<std::size_t>(p.volumes.size());
    const auto J = static_cast<std::size_t>(cells);
    double* part = partials.data() + static_cast<std::size_t>(i) * kPartialCount;
    double* gu = grad.data() + latent_offset(static_cast<std::size_t>(i));
    const double* u = z.data() + latent_offset(static_cast<std::size_t>(i));

    s.lower.resize(J);
    s.bound.resize(J);
    s.t.resize(J);
    s.sig.resize(J);
    s.xi.resize(J);
    s.v.resize(J);
    s.rbar.resize(J);
    s.w.resize(J * K);
    s.dw.resize(J * K);
    s.c.resize(K);
    s.dc.resize(K);

    for (std::size_t k = 0; k < K; ++k) {
      s.c[k] = (p.edge[k] ? th.gamma1 : th.gamma0) * p.volumes[k];
    }
    const double mu = th.eta0 + th.eta1 * p.moe;
    const auto m = static_cast<std::size_t>(p.failure);

    // Forward: standardized profile v_j = (X_j - mu) / tau built from
    // innovations xi_j, each pushed above its truncation bound by softplus.
    double lp = 0.0;
    for (std::size_t j = 0, q = 0; j < J; ++j) {
      double reduction = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        double h = 0.0, dh = 0.0;
        kernel_value_dbeta(kernel_, p.distances(static_cast<Eigen::Index>(j),
                                                static_cast<Eigen::Index>(k)),
                           th.beta, grid_.d_max, h, dh);
        s.w[j * K + k] = h;
        s.dw[j * K + k] = dh;
        reduction += h * s.c[k];
      }
      s.lower[j] = (p.uts + reduction - mu) / tau;
      s.bound[j] = j == 0 ? s.lower[0] : (s.lower[j] - rho * s.v[j - 1]) / sd;
      if (j == m) {
        s.xi[j] = s.bound[j];
      } else {
        const double t = u[q++] - s.bound[j];
        s.t[j] = t;
        s.sig[j] = sigmoid(t);
        s.xi[j] = s.bound[j] + softplus(t);
        lp -= softplus(-t);
      }
      s.v[j] = j == 0 ? s.xi[0] : rho * s.v[j - 1] + sd * s.xi[j];
      lp -= 0.5 * s.xi[j] * s.xi[j];
    }
    const double Jd = static_cast<double>(J);
    lp -= Jd * kHalfLog2Pi + std::log(tau) + (m > 0 ? std::log(sd) : 0.0);
    part[kLp] = lp;

    // Reverse sweep.
    double rho_bar = 0.0, sd_bar = (m > 0 ? -1.0 / sd : 0.0), tau_bar = -1.0 / tau, mu_bar = 0.0;
    double v_bar = 0.0;
    std::size_t q = J - 1;  // one past the current latent
    for (std::size_t jj = J; jj-- > 0;) {
      const std::size_t j = jj;
      double xi_bar = -s.xi[j] + (j == 0 ? v_bar : v_bar * sd);
      double prev_bar = 0.0;
      if (j > 0) {
        sd_bar += v_bar * s.xi[j];
        rho_bar += v_bar * s.v[j - 1];
        prev_bar += v_bar * rho;
      }
      double bound_bar;
      if (j == m) {
        bound_bar = xi_bar;
      } else {
        --q;
        const double t_bar = 1.0 - s.sig[j];
        gu[q] = xi_bar * s.sig[j] + t_bar;
        bound_bar = xi_bar * (1.0 - s.sig[j]) - t_bar;
      }
      double lower_bar;
      if (j == 0) {
        lower_bar = bound_bar;
      } else {
        lower_bar = bound_bar / sd;
        rho_bar -= bound_bar * s.v[j - 1] / sd;
        prev_bar -= bound_bar * rho / sd;
        sd_bar -= bound_bar * s.bound[j] / sd;
      }
      s.rbar[j] = lower_bar / tau;
      mu_bar -= lower_bar / tau;
      tau_bar -= lower_bar * s.lower[j] / tau;
      v_bar = prev_bar;
    }

    part[kMu] = mu_bar;
    part[kRho] = rho_bar - sd_bar * rho / sd + tau_bar * tau * rho / (sd * sd);
    part[kSigma] = tau_bar / sd;

    double dbeta = 0.0;
    for (std::size_t k = 0; k < K; ++k) s.dc[k] = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double g = s.rbar[j];
      for (std::size_t k = 0; k < K; ++k) {
        s.dc[k] += g * s.w[j * K + k];
        dbeta += g * s.c[k] * s.dw[j * K + k];
      }
    }
    double dg0 = 0.0, dg1 = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      (p.edge[k] ? dg1 : dg0) += p.volumes[k] * s.dc[k];
    }
    part[kBeta] = dbeta;
    part[kGamma0] = dg0;
    part[kGamma1] = dg1;
  }

  // Ordered reduction.
  double loglik = 0.0, d_eta0 = 0.0, d_eta1 = 0.0, d_rho = 0.0, d_sigma = 0.0;
  double d_beta = 0.0, d_g0 = 0.0, d_g1 = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* part = partials.data() + static_cast<std::size_t>(i) * kPartialCount;
    loglik += part[kLp];
    d_eta0 += part[kMu];
    d_eta1 += part[kMu] * prepared_[static_cast<std::size_t>(i)].moe;
    d_rho += part[kRho];
    d_sigma += part[kSigma];
    d_beta += part[kBeta];
    d_g0 += part[kGamma0];
    d_g1 += part[kGamma1];
  }

  const PriorSpec& pr = prior_;
  const double hn2 = pr.half_normal_scale * pr.half_normal_scale;
  const double cs2 = pr.cauchy_scale * pr.cauchy_scale;
  const ModelParams params{th.eta0, th.eta1, rho, th.sigma, th.beta, th.gamma0, th.gamma1};
  const double prior_value = log_prior(params, pr);

  d_eta0 += -th.eta0 / (pr.sd_eta * pr.sd_eta);
  d_eta1 += -th.eta1 / (pr.sd_eta * pr.sd_eta);
  d_rho += -(rho - pr.rho_loc) / (pr.rho_scale * pr.rho_scale);
  d_sigma += -2.0 * th.sigma / (cs2 + th.sigma * th.sigma);
  d_beta += -th.beta / hn2;
  d_g0 += -th.gamma0 / hn2;
  d_g1 += -th.gamma1 / hn2;

  grad(0) = d_eta0;
  grad(1) = d_eta1;
  grad(2) = d_rho * rho * th.one_minus_rho + (th.one_minus_rho - rho);
  grad(3) = d_sigma * th.sigma + 1.0;
  grad(4) = d_beta * th.beta + 1.0;
  grad(5) = d_g0 * th.gamma0 + 1.0;
  grad(6) = d_g1 * th.gamma1 + 1.0;

  // The latent Jacobian is already inside each specimen's term.
  const double jac = z(3) + z(4) + z(5) + z(6) + th.log_rho + th.log_one_minus_rho;
  return prior_value + loglik + jac;
}

std::string PosteriorModel::coordinate_name(std::size_t k) const {
  static constexpr std::array<const char*, kNumParams> names = {
      "eta0", "eta1", "logit(rho)", "log(sigma)", "log(beta)", "log(gamma0)", "log(gamma1)"};
  if (k < kNumParams) return names[k];
  if (k >= dim_) return "out-of-range[" + std::to_string(k) + "]";
  const std::size_t per = static_cast<std::size_t>(grid_.cells - 1);
  const std::size_t i = (k - kNumParams) / per;
  const std::size_t q = (k - kNumParams) % per;
  const std::size_t cell = q < static_cast<std::size_t>(prepared_[i].failure) ? q + 1 : q + 2;
  return "u[" + specimens_[i].id + ", cell " + std::to_string(cell) + "]";
}

double PosteriorModel::log_posterior(const Eigen::VectorXd& z) const {
  if (static_cast<std::size_t>(z.size()) != dim_) throw ValidationError("state has wrong length");
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!std::isfinite(z(k))) {
      throw NumericalError("non-finite state at coordinate " + std::to_string(k) + " (" +
                           coordinate_name(static_cast<std::size_t>(k)) + ")");
    }
  }
  Eigen::VectorXd grad;
  const double lp = log_density_gradient(z, grad);
  if (std::isfinite(lp)) return lp;
  if (!params_from(z).satisfies_constraints()) {
    const auto p = params_from(z).to_array();
    for (std::size_t k = 0; k < kNumParams; ++k) {
      if (!std::isfinite(p[k]) || (k >= 2 && !(p[k] > 0.0)) || (k == 2 && !(p[k] < 1.0))) {
        throw NumericalError("non-finite log posterior: parameter coordinate " +
                             std::to_string(k) + " (" + coordinate_name(k) + ") saturated");
      }
    }
  }
  for (std::size_t k = kNumParams; k < dim_; ++k) {
    if (!std::isfinite(grad(static_cast<Eigen::Index>(k)))) {
      throw NumericalError("non-finite log posterior at coordinate " + std::to_string(k) + " (" +
                           coordinate_name(k) + ")");
    }
  }
  throw NumericalError("non-finite log posterior");
}

Eigen::VectorXd PosteriorModel::grad_log_posterior(const Eigen::VectorXd& z) const {
  log_posterior(z);
  Eigen::VectorXd grad;
  log_density_gradient(z, grad);
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    if (!std::isfinite(grad(k))) {
      throw NumericalError("non-finite gradient at coordinate " + std::to_string(k) + " (" +
                           coordinate_name(static_cast<std::size_t>(k)) + ")");
    }
  }
  return grad;
}

Eigen::VectorXd PosteriorModel::initial_state(Rng& rng) const {
  const ModelParams start{0.0,
                          0.0,
                          0.5,
                          prior_.cauchy_scale,
                          kHalfNormalMedian * prior_.half_normal_scale,
                          kHalfNormalMedian * prior_.half_normal_scale,
                          kHalfNormalMedian * prior_.half_normal_scale};
  std::normal_distribution<double> offset(0.5, 0.1);
  std::vector<LatentBlock> latents(specimens_.size());
  for (std::size_t i = 0; i < specimens_.size(); ++i) {
    latents[i].specimen_index = i;
    latents[i].y_minus_obs.resize(grid_.cells - 1);
    for (Eigen::Index j = 0; j < grid_.cells - 1; ++j) {
      double gap = std::abs(offset(rng));
      if (!(gap > 0.0)) gap = 0.5;
      latents[i].y_minus_obs(j) = prepared_[i].uts + gap;
    }
  }
  return transform(start, latents);
}

}  // namespace lumber
