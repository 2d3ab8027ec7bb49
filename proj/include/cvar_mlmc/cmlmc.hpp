#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cvar_mlmc/error_estimation.hpp"
#include "cvar_mlmc/estimator.hpp"
#include "cvar_mlmc/theta_interval.hpp"

namespace cvar_mlmc {

/// Standard MLMC rate model: bias ∝ s^{-α l}, V_l ∝ s^{-β l}, C_l ∝ s^{γ l}.
struct RateEstimates {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
};

/// Shares of ε² given to the three error components.
struct ToleranceSplit {
  double interp = 0.1;
  double bias = 0.3;
  double stat = 0.6;
};

struct CmlmcSettings {
  double tau = 0.7;
  ToleranceSplit split;
  double ratio = 2.0;  // r of the geometric tolerance schedule
  double safety = 1.1;
  int max_rounds = 12;
  int n_max = 1025;
  /// Screening hierarchy; its grid_size is the initial n (n - 1 = 8·2^k).
  Hierarchy screen{2, {64, 32, 16}, 17, 2};
  ErrorSettings errors;
};

struct WarmStart {
  Hierarchy hierarchy;
  RateEstimates rates;
};

/// How Θ is chosen: fixed, or re-selected every round from the current
/// samples while honouring the previous iterate's θ.
struct ThetaPolicy {
  std::optional<Interval> fixed;
  std::optional<double> previous_theta;
  std::optional<Interval> previous_interval;
};

struct RoundRecord {
  int round = 0;
  double target = 0.0;  // ε_k aimed at in this round (0 for the first)
  Hierarchy hierarchy;
  ErrorBreakdown errors;
  double hierarchy_cost = 0.0;
  bool grid_capped = false;
};

struct CmlmcResult {
  ParametricEstimates estimates;
  ErrorBreakdown errors;
  Hierarchy hierarchy;
  RateEstimates rates;
  Interval theta_interval;
  std::vector<RoundRecord> rounds;
  /// Σ_l N_l (C_l + C_{l-1}) of the final hierarchy.
  double hierarchy_cost = 0.0;
  bool converged = false;
  bool grid_capped = false;
};

/// Thrown when max_rounds pass without meeting the tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, ErrorBreakdown last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const ErrorBreakdown& last() const { return last_; }

 private:
  ErrorBreakdown last_;
};

/// N_l = ceil(safety ε_s⁻² √(V_l/C_l) Σ_k √(V_k C_k)), at least 2.
std::vector<std::int64_t> allocate_samples(const std::vector<double>& variance,
                                           const std::vector<double>& cost, double eps_stat,
                                           double safety);

struct GridChoice {
  int n = 0;
  bool capped = false;
};

/// Smallest n_new ≥ n with n_new - 1 = 8·2^k and ê_i ((n-1)/(n_new-1))³ ≤ ε_i.
GridChoice select_grid_size(int n, double interp_error, double eps_interp, int n_max = 1025);

/// Fits the rate model to an error breakdown and per-level costs; falls
/// back to `prior` where fewer than two levels are usable.
RateEstimates fit_rates(const ErrorBreakdown& err, const std::vector<double>& level_costs,
                        int refinement, const RateEstimates& prior = {});

/// Pair cost C_l + C_{l-1} of one coupled sample at each level.
std::vector<double> pair_costs(const Model& model, int max_level);
double hierarchy_cost(const Model& model, const Hierarchy& h);

struct ScreeningResult {
  ParametricEstimates estimates;
  ErrorBreakdown errors;
  RateEstimates rates;
  Hierarchy hierarchy;
  Interval theta_interval;
};

/// Streams: samples use iteration_tag(iteration); the bootstrap of round k
/// uses bootstrap_tag(iteration, k, 0).
ScreeningResult screening(const Model& model, const Design& z, const Hierarchy& screen,
                          const CmlmcSettings& settings, const ThetaPolicy& theta,
                          std::uint64_t seed, std::uint64_t iteration);

CmlmcResult run_cmlmc(const Model& model, const Design& z, double target_tol,
                      const CmlmcSettings& settings, const std::optional<WarmStart>& warm,
                      const ThetaPolicy& theta, std::uint64_t seed, std::uint64_t iteration);

/// Fine Q of the finest level holding at least max(kde_min_samples, 8)
/// samples, for Θ selection and CDFs.
std::vector<double> pooled_samples(const std::vector<LevelBatch>& batches,
                                   const ErrorSettings& settings);

nlohmann::json to_json(const Hierarchy& h);
nlohmann::json to_json(const ErrorBreakdown& e);
nlohmann::json to_json(const RateEstimates& r);
nlohmann::json to_json(const RoundRecord& r);

}  // namespace cvar_mlmc
