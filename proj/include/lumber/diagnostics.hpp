#pragma once

#include <optional>
#include <span>
#include <vector>

namespace lumber {

/// Quantile by linear interpolation of order statistics (h = (n-1)p).
double quantile(std::vector<double> values, double p);

/// Split-chain potential scale reduction. Each chain is halved; returns
/// nullopt when the pooled within-chain variance is zero or a half chain
/// has fewer than two draws.
std::optional<double> split_rhat(std::span<const std::vector<double>> chains);

/// Rank-normalized split-chain effective sample size using Geyer's initial
/// positive pair sums. Clipped to the total number of draws.
double bulk_ess(std::span<const std::vector<double>> chains);

}  // namespace lumber
