#pragma once

#include <array>
#include <span>
#include <vector>

#include "cvar_mlmc/model.hpp"

namespace cvar_mlmc::fhn {

/// Forced FitzHugh–Nagumo oscillator
///   dv = (v - v³/3 - w + I) dt + σ dW₁,   dw = ζ (v + a - b w) dt + σ dW₂
/// with design z = [a, b, ζ, I] and QoI Q = (1/T) ∫ v² dt.
struct Params {
  double sigma = 0.01;
  double horizon = 10.0;  // T
  int base_steps = 20;    // N_T0
  double v0 = 0.0;
  double w0 = 0.0;
  int max_level = 10;
};

/// Named components of the 4-dimensional design.
struct Coefficients {
  double a, b, zeta, forcing;
  static Coefficients from(const Design& z);
};

int steps_at_level(const Params& p, int level);

struct Trajectory {
  int level = 0;
  std::vector<double> v;  // v_0 .. v_N
  std::vector<double> w;
};

struct ForwardResult {
  Trajectory trajectory;
  double qoi = 0.0;
};

/// Euler–Maruyama solve. `noise` holds 2·N standard-normal increments
/// interleaved as (ξ₁₀, ξ₂₀, ξ₁₁, ξ₂₁, ...). The QoI uses the trapezoid rule.
ForwardResult simulate_forward(const Params& p, const Design& z, int level,
                               std::span<const double> noise);

/// Trapezoid time average (1/T) Σ (v_n² + v_{n+1}²)/2 Δt of a state record.
double time_average_square(std::span<const double> v, double dt, double horizon);

/// Brownian-bridge-free coarsening of the Wiener increments: the coarse
/// increment for step k is (ξ_{2k} + ξ_{2k+1})/√2, per component.
std::vector<double> couple_levels(std::span<const double> fine_noise);

/// Discrete adjoint (λ_n, ν_n), n = 1..N; index 0 is unused and left at 0.
/// Solves for the derivative of Q_l itself: terminal λ_N = Δt v_N / T with
/// running source 2 v_n Δt / T. The CVaR factor 1{Q ≥ θ}/(1-τ) is applied
/// later by the estimator.
struct Adjoint {
  std::vector<double> lambda;
  std::vector<double> nu;
};

Adjoint solve_adjoint(const Trajectory& traj, const Params& p, const Design& z);

/// One backward step of the adjoint recursion from (λ_{n+1}, ν_{n+1}) at
/// state v_n. `with_source` toggles the 2 v_n Δt / T running term.
std::array<double, 2> adjoint_step(double lambda_next, double nu_next, double v_n,
                                   const Coefficients& c, double dt, double horizon,
                                   bool with_source = true);

/// Q_{a}, Q_{b}, Q_{ζ}, Q_{I} from a trajectory and its adjoint.
std::array<double, 4> sensitivities(const Trajectory& traj, const Adjoint& adj,
                                    const Params& p, const Design& z);

class FhnModel final : public Model {
 public:
  explicit FhnModel(Params params = {});

  std::string name() const override { return "fhn"; }
  std::size_t dimension() const override { return 4; }
  int max_level() const override { return params_.max_level; }
  double level_cost(int level) const override;
  CorrelatedSample sample_pair(const Design& z, int level, SeedStream& stream) const override;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace cvar_mlmc::fhn
