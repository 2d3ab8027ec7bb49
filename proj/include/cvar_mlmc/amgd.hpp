#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cvar_mlmc/cmlmc.hpp"
#include "cvar_mlmc/model.hpp"

namespace cvar_mlmc {

/// min over (θ, z) of Φ(θ; z) + κ ‖z - z_ref‖².
struct OuuProblem {
  double tau = 0.7;
  double kappa = 1.0;
  Design z_ref;
  Design z0;
  double alpha = 0.1;  // step size
  double eta = 0.2;    // relative accuracy of the gradient estimates
  double eps = 0.01;   // stop when ‖Ĵ_w‖² / ‖Ĵ_w(w_0)‖² ≤ eps
  int max_iters = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OracleRequest {
  int iteration = 0;
  Design z;
  /// RMSE target for the gradient; unset at j = 0 (fixed screening).
  std::optional<double> target_tol;
  std::optional<double> previous_theta;
  std::optional<Interval> previous_interval;
};

/// What the optimiser needs at one design: the θ-minimiser of the Φ
/// surrogate and the surrogates' derivatives there.
struct OracleReply {
  double theta = 0.0;
  double phi = 0.0;        // Φ̂(θ_j) = ĉ_τ
  double phi_prime = 0.0;  // Ĵ_θ(θ_j); zero up to round-off for interior θ_j
  std::vector<double> psi_prime;
  Interval interval;
  double cost = 0.0;
  std::optional<Hierarchy> hierarchy;
  std::optional<ErrorBreakdown> errors;
  /// Fine QoI samples for the empirical CDF.
  std::vector<double> samples;
  bool regrown = false;
};

class GradientOracle {
 public:
  virtual ~GradientOracle() = default;
  virtual OracleReply estimate(const OracleRequest& request) = 0;
};

/// MLMC surrogates: fixed screening hierarchy at j = 0, run_cmlmc warm-started
/// from the previous optimal hierarchy afterwards.
class CmlmcOracle final : public GradientOracle {
 public:
  CmlmcOracle(const Model& model, CmlmcSettings settings, std::uint64_t seed);
  OracleReply estimate(const OracleRequest& request) override;

  /// Estimates behind the most recent reply.
  const ParametricEstimates* last_estimates() const { return last_ ? &*last_ : nullptr; }
  const std::vector<RoundRecord>& last_rounds() const { return rounds_; }

 private:
  const Model& model_;
  CmlmcSettings settings_;
  std::uint64_t seed_;
  std::optional<WarmStart> warm_;
  std::optional<ParametricEstimates> last_;
  std::vector<RoundRecord> rounds_;
};

/// Closed-form surrogates of the linear-Gaussian model (Q = z + σξ).
class LinearGaussianExactOracle final : public GradientOracle {
 public:
  LinearGaussianExactOracle(double sigma, double tau) : sigma_(sigma), tau_(tau) {}
  OracleReply estimate(const OracleRequest& request) override;

 private:
  double sigma_, tau_;
};

struct OptState {
  int j = 0;
  Design z;
  double theta = 0.0;
  Interval interval;
  std::vector<double> gradient;  // J̃_z = Ψ̂′(θ_j) + 2κ(z_j - z_ref)
  double gradient_norm = 0.0;    // ‖Ĵ_w(w_j)‖ with Ĵ_θ = 0
  double phi_prime = 0.0;        // Ĵ_θ as estimated, for checking stationarity
  double residual = 1.0;
  double objective = 0.0;  // Φ̂(θ_j) + κ ‖z_j - z_ref‖²
  double cvar = 0.0;
  double var = 0.0;
  double target_tol = 0.0;  // 0 at j = 0
  double iteration_cost = 0.0;
  double cumulative_cost = 0.0;
  std::optional<Hierarchy> hierarchy;
  std::optional<ErrorBreakdown> errors;
  std::vector<double> samples;
};

/// Evaluates the state at z_0.
OptState initial_state(const OuuProblem& problem, GradientOracle& oracle);

/// z_{j+1} = z_j - α J̃_z, then surrogates at z_{j+1} to RMSE
/// η ‖Ĵ_w(w_j)‖. `initial_norm` is ‖Ĵ_w(w_0)‖.
OptState iterate(const OptState& state, const OuuProblem& problem, GradientOracle& oracle,
                 double initial_norm);

struct AmgdResult {
  std::vector<OptState> history;
  bool converged = false;
};

/// Loops until the residual drops to eps or max_iters. `observer` sees
/// each state as soon as it exists.
AmgdResult run_amgd(const OuuProblem& problem, GradientOracle& oracle,
                    const std::function<void(const OptState&)>& observer = {});

}  // namespace cvar_mlmc
