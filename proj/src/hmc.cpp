#include "lumber/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "lumber/errors.hpp"

namespace lumber {

void HmcConfig::validate() const {
  if (chains < 1) throw ValidationError("hmc: chains must be >= 1");
  if (warmup < 0 || iterations <= warmup) {
    throw ValidationError("hmc: need 0 <= warmup < iterations");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ValidationError("hmc: target_accept must lie in (0, 1)");
  }
  if (max_leapfrog_steps < 1) throw ValidationError("hmc: max_leapfrog_steps must be >= 1");
}

PhasePoint make_phase_point(const LogDensity& target, Eigen::VectorXd z) {
  PhasePoint p;
  p.z = std::move(z);
  p.log_density = target.log_density_gradient(p.z, p.grad);
  return p;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(Eigen::VectorXd z, Eigen::VectorXd p,
                                                     double step_size, int n_steps,
                                                     const GradientFn& gradient) {
  if (!(step_size > 0.0)) throw ValidationError("leapfrog: step_size must be > 0");
  Eigen::VectorXd g = gradient(z);
  for (int s = 0; s < n_steps; ++s) {
    p += 0.5 * step_size * g;
    z += step_size * p;
    g = gradient(z);
    p += 0.5 * step_size * g;
  }
  return {std::move(z), std::move(p)};
}

bool leapfrog(PhasePoint& point, Eigen::VectorXd& p, double step_size, int n_steps,
              const LogDensity& target, const Eigen::VectorXd& inv_metric) {
  for (int s = 0; s < n_steps; ++s) {
    p += 0.5 * step_size * point.grad;
    point.z += step_size * inv_metric.cwiseProduct(p);
    point.log_density = target.log_density_gradient(point.z, point.grad);
    if (!std::isfinite(point.log_density) || !point.grad.allFinite()) return false;
    p += 0.5 * step_size * point.grad;
  }
  return true;
}

double kinetic_energy(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_metric) {
  return 0.5 * p.cwiseProduct(inv_metric).dot(p);
}

namespace {

Eigen::VectorXd draw_momentum(const Eigen::VectorXd& inv_metric, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd p(inv_metric.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = normal(rng) / std::sqrt(inv_metric(k));
  return p;
}

}  // namespace

Transition hmc_iterate(PhasePoint& state, const LogDensity& target, const HmcKernel& kernel,
                       Rng& rng) {
  Transition t;
  Eigen::VectorXd p = draw_momentum(kernel.inv_metric, rng);
  const double h0 = -state.log_density + kinetic_energy(p, kernel.inv_metric);
  t.steps = std::uniform_int_distribution<int>(1, std::max(1, kernel.max_steps))(rng);

  PhasePoint proposal = state;
  const bool finite = leapfrog(proposal, p, kernel.step_size, t.steps, target, kernel.inv_metric);
  const double h1 = finite ? -proposal.log_density + kinetic_energy(p, kernel.inv_metric)
                           : std::numeric_limits<double>::infinity();
  t.energy_error = h1 - h0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (!std::isfinite(t.energy_error) || std::abs(t.energy_error) > kDivergenceThreshold) {
    t.divergent = true;
    t.accept_stat = 0.0;
    return t;
  }
  t.accept_stat = std::min(1.0, std::exp(-t.energy_error));
  if (u < t.accept_stat) {
    state = std::move(proposal);
    t.accepted = true;
  }
  return t;
}

void DualAveraging::restart(double step_size) {
  mu_ = std::log(10.0 * step_size);
  s_bar_ = 0.0;
  x_bar_ = 0.0;
  counter_ = 0;
}

double DualAveraging::update(double accept_stat) {
  accept_stat = std::isfinite(accept_stat) ? std::min(1.0, accept_stat) : 0.0;
  ++counter_;
  const double n = counter_;
  const double eta = 1.0 / (n + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(n) / gamma_;
  const double x_eta = std::pow(n, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

double DualAveraging::final_step_size() const { return std::exp(x_bar_); }

std::vector<WarmupSchedule::Window> WarmupSchedule::windows(int warmup) const {
  std::vector<Window> out;
  if (warmup < 20) return out;
  int init = init_buffer, base = base_window;
  int term = std::max(term_buffer, static_cast<int>(term_fraction * warmup));
  if (init + base + term > warmup) {
    init = static_cast<int>(0.15 * warmup);
    term = static_cast<int>(0.1 * warmup);
    base = warmup - init - term;
  }
  const int stop = warmup - term;
  int begin = init;
  int size = base;
  while (begin < stop) {
    int end = begin + size;
    if (end + 2 * size > stop) end = stop;
    out.push_back({begin, end});
    begin = end;
    size *= 2;
  }
  return out;
}

Eigen::VectorXd estimate_inv_metric(const Eigen::MatrixXd& window_draws) {
  const auto n = static_cast<double>(window_draws.rows());
  Eigen::VectorXd var = Eigen::VectorXd::Ones(window_draws.cols());
  if (window_draws.rows() >= 2) {
    const Eigen::RowVectorXd mean = window_draws.colwise().mean();
    var = ((window_draws.rowwise() - mean).array().square().colwise().sum() / (n - 1.0))
              .transpose();
    var = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
  }
  return var.cwiseMax(1e-10);
}

double find_initial_step_size(const PhasePoint& state, const LogDensity& target,
                              const Eigen::VectorXd& inv_metric, double step_size, Rng& rng) {
  const double log_target = std::log(0.8);
  auto delta_h = [&](double eps) {
    Eigen::VectorXd p = draw_momentum(inv_metric, rng);
    const double h0 = -state.log_density + kinetic_energy(p, inv_metric);
    PhasePoint q = state;
    if (!leapfrog(q, p, eps, 1, target, inv_metric)) return -std::numeric_limits<double>::infinity();
    const double h1 = -q.log_density + kinetic_energy(p, inv_metric);
    return std::isfinite(h1) ? h0 - h1 : -std::numeric_limits<double>::infinity();
  };
  double eps = step_size;
  const int direction = delta_h(eps) > log_target ? 1 : -1;
  for (int iter = 0; iter < 100; ++iter) {
    const double next = direction == 1 ? 2.0 * eps : 0.5 * eps;
    const double dh = delta_h(next);
    eps = next;
    if (direction == 1 && !(dh > log_target)) {
      eps = 0.5 * eps;
      break;
    }
    if (direction == -1 && dh > log_target) break;
    if (eps > 1e7 || eps < 1e-12) break;
  }
  return std::clamp(eps, 1e-12, 1e7);
}

double mean_uturn_steps(const PhasePoint& state, const LogDensity& target,
                        const Eigen::VectorXd& inv_metric, double step_size, int max_steps,
                        int probes, Rng& rng) {
  double total = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    Eigen::VectorXd p = draw_momentum(inv_metric, rng);
    PhasePoint q = state;
    int steps = 0;
    while (steps < max_steps) {
      if (!leapfrog(q, p, step_size, 1, target, inv_metric)) break;
      ++steps;
      if ((q.z - state.z).dot(inv_metric.cwiseProduct(p)) < 0.0) break;
    }
    total += std::max(steps, 1);
  }
  return total / probes;
}

namespace {

int trajectory_cap(const PhasePoint& state, const LogDensity& target,
                   const Eigen::VectorXd& inv_metric, double step_size, int max_steps, Rng& rng) {
  constexpr int kProbes = 10;
  const double mean = mean_uturn_steps(state, target, inv_metric, step_size, max_steps, kProbes, rng);
  return std::clamp(static_cast<int>(std::ceil(1.5 * mean)), 1, max_steps);
}

}  // namespace

HmcKernel adapt_warmup(PhasePoint& state, const LogDensity& target, const HmcConfig& config,
                       const WarmupSchedule& schedule, Rng& rng) {
  HmcKernel kernel;
  kernel.inv_metric = Eigen::VectorXd::Ones(state.z.size());
  kernel.step_size = find_initial_step_size(state, target, kernel.inv_metric, 1.0, rng);
  kernel.max_steps = trajectory_cap(state, target, kernel.inv_metric, kernel.step_size,
                                    config.max_leapfrog_steps, rng);
  if (config.warmup == 0) return kernel;

  DualAveraging dual(config.target_accept);
  dual.restart(kernel.step_size);
  const auto windows =
      config.adapt_mass ? schedule.windows(config.warmup) : std::vector<WarmupSchedule::Window>{};
  std::size_t w = 0;
  Eigen::MatrixXd window_draws;

  for (int it = 0; it < config.warmup; ++it) {
    const Transition t = hmc_iterate(state, target, kernel, rng);
    kernel.step_size = dual.update(t.accept_stat);

    if (w < windows.size() && it >= windows[w].begin && it < windows[w].end) {
      if (it == windows[w].begin) {
        window_draws.resize(windows[w].end - windows[w].begin, state.z.size());
      }
      window_draws.row(it - windows[w].begin) = state.z.transpose();
      if (it + 1 == windows[w].end) {
        kernel.inv_metric = estimate_inv_metric(window_draws);
        kernel.step_size =
            find_initial_step_size(state, target, kernel.inv_metric, kernel.step_size, rng);
        dual.restart(kernel.step_size);
        kernel.max_steps = trajectory_cap(state, target, kernel.inv_metric, kernel.step_size,
                                          config.max_leapfrog_steps, rng);
        ++w;
      }
    }
  }
  kernel.step_size = dual.final_step_size();
  kernel.max_steps = trajectory_cap(state, target, kernel.inv_metric, kernel.step_size,
                                    config.max_leapfrog_steps, rng);
  return kernel;
}

ChainResult run_chain(const LogDensity& target, const HmcConfig& config, int chain,
                      const Initializer& init, const DrawMapper& mapper,
                      const WarmupSchedule& schedule) {
  config.validate();
  Rng rng = make_stream(config.seed, {static_cast<std::uint64_t>(chain)});
  PhasePoint state = make_phase_point(target, init(rng));
  if (!std::isfinite(state.log_density) || !state.grad.allFinite()) {
    throw NumericalError("chain " + std::to_string(chain) + ": initial state has non-finite density");
  }

  ChainResult out;
  out.kernel = adapt_warmup(state, target, config, schedule, rng);

  const int retained = config.retained();
  out.log_density.resize(retained);
  double accept_sum = 0.0;
  for (int it = 0; it < retained; ++it) {
    const Transition t = hmc_iterate(state, target, out.kernel, rng);
    accept_sum += t.accept_stat;
    if (t.divergent) ++out.divergences;
    const Eigen::VectorXd row = mapper(state.z, state.log_density);
    if (it == 0) out.draws.resize(retained, row.size());
    out.draws.row(it) = row.transpose();
    out.log_density(it) = state.log_density;
  }
  out.mean_accept = accept_sum / retained;
  return out;
}

std::vector<ChainResult> run_chains(const LogDensity& target, const HmcConfig& config,
                                    const Initializer& init, const DrawMapper& mapper,
                                    const WarmupSchedule& schedule) {
  config.validate();
  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(results.size());

#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < config.chains; ++c) {
    try {
      results[static_cast<std::size_t>(c)] = run_chain(target, config, c, init, mapper, schedule);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace lumber
