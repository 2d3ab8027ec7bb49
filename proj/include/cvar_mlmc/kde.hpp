#pragma once

#include <span>
#include <vector>

namespace cvar_mlmc::kde {

/// ∫ (q - θ)⁺ K_δ(q, μ) dq for a Gaussian kernel of mean μ and width δ:
///   (μ - θ) Φ_N((μ - θ)/δ) + δ φ_N((μ - θ)/δ).
double gaussian_partial_moment(double theta, double mu, double delta);

/// Scott's rule σ̂ N^{-1/5} with the sample standard deviation, floored
/// at 1e-12.
double scott_bandwidth(std::span<const double> samples);

/// θ ↦ θ + Σ_i M(θ; Q_i, δ) / (N (1 - τ)).
std::vector<double> kde_phi(std::span<const double> theta, std::span<const double> q,
                            double delta, double tau);

/// θ ↦ -Σ_i g_i M(θ; Q_i, δ) / (N (1 - τ)).
std::vector<double> kde_psi(std::span<const double> theta, std::span<const double> q,
                            std::span<const double> g, double delta, double tau);

/// θ ↦ Σ_i [g_c,i M(θ; Qc_i, δ_c) - g_f,i M(θ; Qf_i, δ_f)] / (N (1 - τ)),
/// the smoothed E[ψ_l - ψ_{l-1}].
std::vector<double> kde_level_difference(std::span<const double> theta,
                                         std::span<const double> q_fine,
                                         std::span<const double> g_fine,
                                         std::span<const double> q_coarse,
                                         std::span<const double> g_coarse, double delta_fine,
                                         double delta_coarse, double tau);

/// Σ_i g_i M(θ_r; Q_i, δ) for several weight vectors at once; the kernel
/// moments are shared, so this costs about one kde_psi call. out[t][r].
std::vector<std::vector<double>> weighted_moment_sums(std::span<const double> theta,
                                                      std::span<const double> q,
                                                      const std::vector<std::vector<double>>& g,
                                                      double delta);

/// max |4th central difference| / h⁴ over interior points; needs ≥ 9 points.
double fourth_derivative_sup_norm(std::span<const double> values, double h);

}  // namespace cvar_mlmc::kde
