#include "lumber/sampler.hpp"

#include <cmath>
#include <string>

#include "lumber/diagnostics.hpp"
#include "lumber/errors.hpp"

namespace lumber {

std::size_t PosteriorDraws::total() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += static_cast<std::size_t>(c.params.rows());
  return n;
}

std::vector<ModelParams> PosteriorDraws::pooled() const {
  std::vector<ModelParams> out;
  out.reserve(total());
  for (const auto& c : chains) {
    for (Eigen::Index r = 0; r < c.params.rows(); ++r) {
      std::array<double, ModelParams::kCount> a{};
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = c.params(r, static_cast<Eigen::Index>(k));
      out.push_back(ModelParams::from_array(a));
    }
  }
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::parameter_chains(std::size_t k) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const Eigen::VectorXd col = c.params.col(static_cast<Eigen::Index>(k));
    out.emplace_back(col.data(), col.data() + col.size());
  }
  return out;
}

std::vector<ModelParams> PosteriorDraws::thinned(std::size_t max_draws) const {
  auto all = pooled();
  if (max_draws == 0 || all.size() <= max_draws) return all;
  std::vector<ModelParams> out;
  out.reserve(max_draws);
  const double stride = static_cast<double>(all.size()) / static_cast<double>(max_draws);
  for (std::size_t i = 0; i < max_draws; ++i) {
    out.push_back(all[static_cast<std::size_t>(std::floor(i * stride))]);
  }
  return out;
}

PosteriorDraws run_chains(const PosteriorModel& model, const HmcConfig& config,
                          const FitOptions& options) {
  config.validate();
  const std::size_t n_latent = model.dim() - PosteriorModel::kNumParams;
  const std::size_t width = PosteriorModel::kNumParams + (options.keep_latents ? n_latent : 0);

  // Each stored row: constrained theta, then (optionally) latent Y values.
  DrawMapper mapper = [&model, &options, width](const Eigen::VectorXd& z, double) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(width));
    const ModelParams p = model.params_from(z);
    if (!p.satisfies_constraints()) {
      throw NumericalError("draw violates parameter constraints");
    }
    const auto a = p.to_array();
    for (std::size_t k = 0; k < a.size(); ++k) row(static_cast<Eigen::Index>(k)) = a[k];
    const auto blocks = model.latents_from(z);
    Eigen::Index at = PosteriorModel::kNumParams;
    for (const auto& b : blocks) {
      const double uts = *model.specimens()[b.specimen_index].uts;
      if (!(b.y_minus_obs.array() > uts).all()) {
        throw NumericalError("latent draw for specimen " + model.specimens()[b.specimen_index].id +
                             " left the truncation region");
      }
      if (options.keep_latents) {
        row.segment(at, b.y_minus_obs.size()) = b.y_minus_obs;
        at += b.y_minus_obs.size();
      }
    }
    return row;
  };
  Initializer init = [&model](Rng& rng) { return model.initial_state(rng); };

  const auto results = lumber::run_chains(static_cast<const LogDensity&>(model), config, init, mapper);

  PosteriorDraws out;
  out.warmup = config.warmup;
  for (const auto& r : results) {
    ChainDraws c;
    c.params = r.draws.leftCols(PosteriorModel::kNumParams);
    if (options.keep_latents) c.latents = r.draws.rightCols(static_cast<Eigen::Index>(n_latent));
    c.log_posterior = r.log_density;
    c.mean_accept = r.mean_accept;
    c.divergences = r.divergences;
    c.step_size = r.kernel.step_size;
    c.max_steps = r.kernel.max_steps;
    c.inv_metric = r.kernel.inv_metric;
    if (c.divergences > kMaxDivergentFraction * config.retained()) out.failed = true;
    out.chains.push_back(std::move(c));
  }
  return out;
}

Diagnostics diagnose(const PosteriorDraws& draws) {
  Diagnostics d;
  for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
    const auto chains = draws.parameter_chains(k);
    d.rhat[k] = split_rhat(chains);
    d.ess[k] = bulk_ess(chains);
  }
  for (const auto& c : draws.chains) {
    d.divergences.push_back(c.divergences);
    d.mean_accept.push_back(c.mean_accept);
  }
  return d;
}

std::vector<QuantileRow> posterior_quantiles(const PosteriorDraws& draws,
                                             const std::vector<double>& probs) {
  if (draws.total() == 0) throw ValidationError("posterior_quantiles: no draws");
  std::vector<QuantileRow> rows;
  for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
    std::vector<double> pooled;
    for (const auto& c : draws.parameter_chains(k)) pooled.insert(pooled.end(), c.begin(), c.end());
    QuantileRow row{std::string(ModelParams::kNames[k]), {}};
    for (double p : probs) row.values.push_back(quantile(pooled, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lumber
