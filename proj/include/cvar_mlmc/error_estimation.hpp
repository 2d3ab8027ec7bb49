#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cvar_mlmc/estimator.hpp"

namespace cvar_mlmc {

/// Squared error components of one gradient target. Target 0 is Φ̂′,
/// target k ≥ 1 is Ψ̂′_k.
struct TargetError {
  double interp_sq = 0.0;
  double bias_sq = 0.0;
  double stat_sq = 0.0;
  double total() const { return interp_sq + bias_sq + stat_sq; }
};

/// MSE[Ĵ_w] as the plain sum of every target's three components.
double total_gradient_mse(const std::vector<TargetError>& targets);

struct ErrorSettings {
  double spline_constant = 0.2;  // C_s
  int bootstrap_replicas = 50;   // B
  /// Level whose fine samples feed the KDE for the interpolation error;
  /// defaults to ⌈L/2⌉.
  std::optional<int> kde_level;
  /// Step down to coarser levels until one has at least this many samples.
  std::int64_t kde_min_samples = 32;
  /// Only the first kde_max_samples samples of a level enter a KDE.
  std::int64_t kde_max_samples = 4000;
  /// Number of most-resolved levels in the weak-rate regression.
  int regression_levels = 4;
  /// Weak rate used when fewer than two levels can be regressed.
  double prior_alpha = 1.0;
};

struct ErrorBreakdown {
  std::vector<TargetError> targets;
  /// Per-target fitted weak rate and level-difference sup norms D_l (index l).
  std::vector<double> alpha;
  std::vector<std::vector<double>> level_bias;
  /// Bootstrap per-level variance proxies V_l, summed over targets: level l
  /// contributes about V_l / N_l to the squared statistical error.
  std::vector<double> level_variance;
  int kde_level = 0;
  /// α̂ ≤ 0 for some target; its bias fell back to D_L.
  bool bias_rate_fallback = false;

  double interp_sq() const;
  double bias_sq() const;
  double stat_sq() const;
  double total_mse_sq() const { return total_gradient_mse(targets); }
};

/// Level actually used for the KDE smoothing (see ErrorSettings).
int choose_kde_level(const std::vector<LevelBatch>& batches, const ErrorSettings& settings);

/// ê_i for one target: C_s ‖f⁽⁴⁾‖_∞ h_θ³ with f the KDE-smoothed target.
double interp_error(const std::vector<LevelBatch>& batches, const ThetaGrid& grid, double tau,
                    std::size_t target, const ErrorSettings& settings);

struct BiasEstimate {
  double value = 0.0;  // ê_b
  double alpha = 0.0;
  bool fallback = false;
  std::vector<double> level_sup;  // D_l, entry 0 unused
};

/// ê_b = D_L / (s^α̂ - 1) from KDE level differences.
BiasEstimate bias_error(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                        double tau, std::size_t target, int refinement,
                        const ErrorSettings& settings);

/// Regresses log D_l on l over levels first..L (skipping D_l = 0) and
/// returns D_L / (s^α̂ - 1). D_L = 0 gives 0; fewer than two usable levels
/// use `prior_alpha`; α̂ ≤ 0 falls back to D_L.
BiasEstimate extrapolate_bias(std::vector<double> level_sup, int first, int refinement,
                              double prior_alpha);
struct StatEstimate {
  std::vector<double> stat_sq;         // per target
  std::vector<double> level_variance;  // per level, summed over targets
};

/// Bootstrap: resample every level with replacement B times and measure the
/// sup-norm deviation of the spline derivative on the dense probe grid.
/// Replica b of level l draws from the stream (seed, l, b, tag).
StatEstimate stat_error_bootstrap(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                                  double tau, int replicas, std::uint64_t seed,
                                  std::uint64_t tag);

ErrorBreakdown estimate_errors(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                               double tau, int refinement, const ErrorSettings& settings,
                               std::uint64_t seed, std::uint64_t tag);

}  // namespace cvar_mlmc
