#pragma once

#include <optional>
#include <span>

namespace cvar_mlmc {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Empirical p-quantile (linear interpolation between order statistics).
double empirical_quantile(std::span<const double> sorted, double p);

/// Θ = [q̂_{τ-0.1}, q̂_{τ+0.1}] widened by half its width, then stretched so
/// that `previous_theta` sits at least 10% of the width inside each end.
/// If the quantiles coincide the width falls back to 0.2·max(1, |q̂_τ|), or
/// to the previous interval's width when one is given.
Interval select_theta_interval(std::span<const double> samples, double tau,
                               std::optional<double> previous_theta = std::nullopt,
                               std::optional<Interval> previous_interval = std::nullopt);

}  // namespace cvar_mlmc
