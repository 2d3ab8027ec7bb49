#include "cvar_mlmc/theta_interval.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {

double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InsufficientSamplesError("quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

Interval select_theta_interval(std::span<const double> samples, double tau,
                               std::optional<double> previous_theta,
                               std::optional<Interval> previous_interval) {
  if (samples.size() < 8) throw InsufficientSamplesError("theta interval: need at least 8 samples");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  std::vector<double> q(samples.begin(), samples.end());
  std::sort(q.begin(), q.end());
  const double centre = empirical_quantile(q, tau);
  Interval out{empirical_quantile(q, tau - 0.1), empirical_quantile(q, tau + 0.1)};
  const double scale = std::max(1.0, std::fabs(centre));
  if (!(out.width() > 1e-12 * scale)) {
    const double half = previous_interval && previous_interval->width() > 0.0
                            ? 0.5 * previous_interval->width()
                            : 0.1 * scale;
    out = {centre - half, centre + half};
  } else {
    const double grow = 0.25 * out.width();
    out = {out.lo - grow, out.hi + grow};
  }
  if (previous_theta) {
    const double t = *previous_theta;
    // Stretch to an 11% margin so rounding cannot leave it under 10%.
    if (t < out.lo + 0.1 * out.width()) out.lo = (t - 0.11 * out.hi) / 0.89;
    if (t > out.hi - 0.1 * out.width()) out.hi = (t - 0.11 * out.lo) / 0.89;
  }
  return out;
}

}  // namespace cvar_mlmc
