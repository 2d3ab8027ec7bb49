#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "cvar_mlmc/model.hpp"

namespace cvar_mlmc::pollutant {

struct SourceTerm {
  double mu1, mu2, sigma, strength;
};

/// Five Gaussian pollutant sources.
const std::array<SourceTerm, 5>& source_table();

/// Centre of sink k (0-based), k = 3(i-1) + (j-1) for p_k = (0.25 i, 0.25 j).
std::array<double, 2> sink_centre(int k);
inline constexpr double kSinkWidth = 0.05;
inline constexpr int kSinkCount = 9;

struct Params {
  double eps_visc = 0.1;
  double kappa_s = 1e4;
  int max_level = 6;
  int base_cells = 32;
  double a_lo = 4.95, a_hi = 5.05;
  double b_lo = 3.95, b_hi = 4.05;
};

/// Velocity-field sample ω = (a, b); V(x) = (b - a x₁, a x₂).
struct Velocity {
  double a, b;
};

/// Cells per side at `level`: round(base · 2^{l/2}).
int cells_at_level(const Params& p, int level);

/// Nodal field on the (M+1)² grid, row-major in x₂: index i·(M+1) + j
/// for node (x₁, x₂) = (i h, j h). Column i = 0 is the Dirichlet boundary.
struct GridField {
  int level = 0;
  int cells = 0;
  std::vector<double> u;
  double at(int i, int j) const { return u[static_cast<std::size_t>(i) * (cells + 1) + j]; }
};

struct ForwardSolution {
  GridField field;
  double qoi = 0.0;
};

/// Discrete operator on the M(M+1) unknowns (nodes with i ≥ 1). Five-point
/// diffusion; advection is central where the cell Péclet number |V|h/(2ε)
/// is at most 1 and first-order upwind elsewhere, so the matrix stays an
/// M-matrix. Neumann sides use ghost-node reflection.
class Discretisation {
 public:
  Discretisation(const Params& p, int level, Velocity omega);

  int cells() const { return cells_; }
  double h() const { return 1.0 / cells_; }
  std::size_t unknowns() const { return static_cast<std::size_t>(cells_) * (cells_ + 1); }
  std::size_t unknown_index(int i, int j) const {
    return static_cast<std::size_t>(i - 1) * (cells_ + 1) + j;
  }
  const Eigen::SparseMatrix<double>& matrix() const { return a_; }

  /// Right-hand side sampled at the unknown nodes.
  Eigen::VectorXd sample(const std::function<double(double, double)>& f) const;
  /// Trapezoid weights of the unknown nodes (h² times edge/corner halves).
  Eigen::VectorXd quadrature_weights() const;
  GridField to_field(const Eigen::VectorXd& interior, int level) const;

 private:
  int cells_;
  Eigen::SparseMatrix<double> a_;
};

double source(double x1, double x2);
double sink_bump(int k, double x1, double x2);

class Solver {
 public:
  Solver(const Params& p, int level, Velocity omega);

  /// Solves A u = rhs; throws SolverError if the factorisation failed.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Solves Aᵀ λ = rhs with the same factorisation.
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& rhs) const;
  const Discretisation& discretisation() const { return disc_; }

 private:
  Discretisation disc_;
  struct Factor;
  std::shared_ptr<Factor> lu_;
};

ForwardSolution solve_forward(const Params& p, const Design& z, Velocity omega, int level);

/// Adjoint sensitivities dQ_l/dz^k. `forward` must come from the same
/// (ω, level).
std::vector<double> sensitivities(const Params& p, const Design& z, Velocity omega, int level,
                                  const GridField& forward);

/// Q_l = (κ_s/2) Σ W_p u_p².
double qoi(const Params& p, const GridField& field);

class PollutantModel final : public Model {
 public:
  explicit PollutantModel(Params params = {});

  std::string name() const override { return "pollutant"; }
  std::size_t dimension() const override { return kSinkCount; }
  int max_level() const override { return params_.max_level; }
  double level_cost(int level) const override;
  CorrelatedSample sample_pair(const Design& z, int level, SeedStream& stream) const override;

  /// Velocity draw used by sample_pair: a first, then b, from the stream.
  Velocity draw_velocity(SeedStream& stream) const;
  /// Q and gradient at one level for a fixed ω.
  std::pair<double, std::vector<double>> evaluate(const Design& z, Velocity omega,
                                                  int level) const;
  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace cvar_mlmc::pollutant
