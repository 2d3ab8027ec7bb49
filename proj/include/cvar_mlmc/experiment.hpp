#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "cvar_mlmc/config.hpp"
#include "cvar_mlmc/estimator.hpp"

namespace cvar_mlmc {

/// Large single-level Monte Carlo reference for the gradient targets:
/// Φ′(θ) = 1 - P(Q ≥ θ)/(1-τ) and Ψ′_k(θ) = E[1{Q ≥ θ} Q_{z^k}]/(1-τ),
/// tabulated as indicator averages on a dense θ grid.
struct Reference {
  std::vector<double> z;
  double tau = 0.7;
  int level = 0;
  std::int64_t samples = 0;
  double var = 0.0;
  double cvar = 0.0;
  std::vector<double> theta;
  std::vector<double> phi_prime;
  std::vector<std::vector<double>> psi_prime;  // [k][r]

  bool covers(double t) const { return !theta.empty() && t >= theta.front() && t <= theta.back(); }
  /// [Φ′, Ψ′_1..d] at θ, linearly interpolated.
  std::vector<double> gradient_at(double t) const;
};

/// Samples i = 0..N-1 of `level` use the streams (seed, level, i,
/// reference_tag(0)), disjoint from every experiment stream.
Reference make_reference(const Model& model, const Design& z, double tau, std::int64_t samples,
                         int level, int grid_points, std::uint64_t seed);

nlohmann::json to_json(const Reference& r);
Reference reference_from_json(const nlohmann::json& j);

struct TrueError {
  double pointwise = 0.0;  // ‖est - ref‖₂ over targets at θ̂_τ
  double sup = 0.0;        // √Σ_t ‖est_t - ref_t‖²_∞ over the covered probe points
};

TrueError true_gradient_error(const ParametricEstimates& est, double theta_hat,
                              const Reference& ref);

/// Runs one experiment and writes its artifacts under cfg.out_dir.
void run_experiment(const ExperimentConfig& cfg);

}  // namespace cvar_mlmc
