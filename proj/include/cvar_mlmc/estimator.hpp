#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cvar_mlmc/model.hpp"
#include "cvar_mlmc/spline.hpp"

namespace cvar_mlmc {

/// MLMC hierarchy: levels 0..L with N_l samples each, n θ-grid points and
/// level refinement factor s.
struct Hierarchy {
  int max_level = 0;
  std::vector<std::int64_t> samples;
  int grid_size = 17;
  int refinement = 2;

  int levels() const { return max_level + 1; }
  /// Throws ParameterError unless L ≥ 0, |N| = L + 1, N_l ≥ 2, n ≥ 4, s ≥ 2.
  void validate() const;
};

/// Draws the coupled samples of every level. Sample i of level l uses the
/// stream (seed, l, i, tag), so extending N_l later reproduces the same
/// prefix. Model failures are rethrown as SampleError.
std::vector<LevelBatch> simulate_batches(const Model& model, const Design& z,
                                         const Hierarchy& h, std::uint64_t seed,
                                         std::uint64_t tag);

/// Grows `batches` in place to match `h` (new levels and extra samples).
/// Existing samples are kept, never recomputed or dropped.
void extend_batches(const Model& model, const Design& z, const Hierarchy& h,
                    std::uint64_t seed, std::uint64_t tag, std::vector<LevelBatch>& batches);

/// Pointwise Φ̂ and Ψ̂_k on the grid; psi[k][r].
struct PhiPsiPointwise {
  std::vector<double> phi;
  std::vector<std::vector<double>> psi;
};

/// Telescoping sum Σ_l (1/N_l) Σ_i [g(fine) - g(coarse)] for g = φ and ψ_k.
PhiPsiPointwise pointwise_from_batches(const std::vector<LevelBatch>& batches,
                                       const ThetaGrid& grid, double tau);

struct PointwiseResult {
  PhiPsiPointwise pointwise;
  std::vector<LevelBatch> batches;
};

PointwiseResult estimate_pointwise(const Model& model, const Design& z, const Hierarchy& h,
                                   const ThetaGrid& grid, double tau, std::uint64_t seed,
                                   std::uint64_t tag);

/// Spline functionals Φ̂ and Ψ̂_k; their θ-derivatives are the gradient
/// estimates.
struct ParametricEstimates {
  ThetaGrid grid;
  Design design;
  double tau;
  PhiPsiPointwise pointwise;
  Spline phi;
  std::vector<Spline> psi;
  std::vector<LevelBatch> batches;
  double total_cost = 0.0;

  std::size_t dimension() const { return psi.size(); }
  double phi_prime(double theta) const { return phi.eval(theta, 1); }
  double psi_prime(std::size_t k, double theta) const { return psi[k].eval(theta, 1); }
};

ParametricEstimates build_functionals(PhiPsiPointwise pointwise, const ThetaGrid& grid,
                                      const Design& z, double tau,
                                      std::vector<LevelBatch> batches = {});

double batches_cost(const std::vector<LevelBatch>& batches);

struct VarCvar {
  double var = 0.0;
  double cvar = 0.0;
  /// Minimiser sits on the edge of Θ; the interval should be regrown.
  bool on_boundary = false;
};

VarCvar extract_var_cvar(const ParametricEstimates& est, double lo, double hi);
inline VarCvar extract_var_cvar(const ParametricEstimates& est) {
  return extract_var_cvar(est, est.grid.lo(), est.grid.hi());
}

/// CSV with columns theta, phi, phi_prime, psi_prime_1..d on `probe`.
void write_estimates_csv(const std::filesystem::path& path, const ParametricEstimates& est,
                         const ThetaGrid& probe);

}  // namespace cvar_mlmc
