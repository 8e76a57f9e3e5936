#include "lumber/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "lumber/errors.hpp"

namespace lumber {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<std::vector<double>> split_halves(std::span<const std::vector<double>> chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // Odd lengths drop the middle draw.
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / (static_cast<double>(v.size()) - 1.0);
}

}  // namespace

std::optional<double> split_rhat(std::span<const std::vector<double>> chains) {
  const auto halves = split_halves(chains);
  if (halves.empty() || halves.front().size() < 2) return std::nullopt;
  const auto n = static_cast<double>(halves.front().size());
  const auto m = static_cast<double>(halves.size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    within += var_of(h, means.back());
  }
  within /= m;
  if (!(within > 0.0)) return std::nullopt;
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= n / (m - 1.0);
  return std::sqrt((within * (n - 1.0) / n + between / n) / within);
}

double bulk_ess(std::span<const std::vector<double>> chains) {
  auto halves = split_halves(chains);
  if (halves.empty() || halves.front().size() < 4) return 0.0;
  const std::size_t n = halves.front().size();
  const std::size_t m = halves.size();
  const double total = static_cast<double>(n * m);

  // Rank normalization over the pooled draws (average ranks for ties).
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n * m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t t = 0; t < n; ++t) pooled.emplace_back(halves[c][t], c * n + t);
  }
  std::sort(pooled.begin(), pooled.end());
  const boost::math::normal_distribution<double> std_normal;
  std::vector<double> z(pooled.size());
  for (std::size_t a = 0; a < pooled.size();) {
    std::size_t b = a;
    while (b + 1 < pooled.size() && pooled[b + 1].first == pooled[a].first) ++b;
    const double rank = 0.5 * static_cast<double>(a + b) + 1.0;
    const double q = boost::math::quantile(std_normal, (rank - 0.375) / (total + 0.25));
    for (std::size_t k = a; k <= b; ++k) z[pooled[k].second] = q;
    a = b + 1;
  }
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t t = 0; t < n; ++t) halves[c][t] = z[c * n + t];
  }

  std::vector<double> means(m), variances(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(halves[c]);
    variances[c] = var_of(halves[c], means[c]);
  }
  const double within = std::accumulate(variances.begin(), variances.end(), 0.0) / m;
  const double grand = mean_of(means);
  double between_over_n = 0.0;
  for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
  between_over_n = m > 1 ? between_over_n / (static_cast<double>(m) - 1.0) : 0.0;
  const double dn = static_cast<double>(n);
  const double var_plus = within * (dn - 1.0) / dn + between_over_n;
  if (!(var_plus > 0.0)) return 0.0;

  // Autocovariance (1/n normalization) at lag t averaged over chains.
  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = halves[c];
      double acc = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) acc += (x[t] - means[c]) * (x[t + lag] - means[c]);
      s += acc / dn;
    }
    return s / static_cast<double>(m);
  };
  const double mean_var = mean_acov(0) * dn / (dn - 1.0);
  auto rho = [&](std::size_t lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

  // Geyer initial positive sequence with monotone pair sums.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

}  // namespace lumber
