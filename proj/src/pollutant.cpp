#include "cvar_mlmc/pollutant.hpp"

#include <cmath>
#include <memory>

#include <Eigen/SparseLU>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc::pollutant {

const std::array<SourceTerm, 5>& source_table() {
  static const std::array<SourceTerm, 5> table{{
      {0.55205319, 0.65571641, 0.0229487, 2.3220339},
      {0.49379544, 0.10950509, 0.0205321, 1.7931427},
      {0.13032797, 0.57569277, 0.0196891, 2.3522452},
      {0.33868732, 0.37971428, 0.0212297, 2.2850373},
      {0.27670822, 0.15833522, 0.0227373, 2.3194400},
  }};
  return table;
}

std::array<double, 2> sink_centre(int k) {
  if (k < 0 || k >= kSinkCount) throw ParameterError("pollutant: sink index out of range");
  return {0.25 * (k / 3 + 1), 0.25 * (k % 3 + 1)};
}

double source(double x1, double x2) {
  double f = 0.0;
  for (const auto& s : source_table()) {
    const double r2 = (x1 - s.mu1) * (x1 - s.mu1) + (x2 - s.mu2) * (x2 - s.mu2);
    f += s.strength * std::exp(-r2 / (2.0 * s.sigma * s.sigma));
  }
  return f;
}

double sink_bump(int k, double x1, double x2) {
  const auto c = sink_centre(k);
  const double r2 = (x1 - c[0]) * (x1 - c[0]) + (x2 - c[1]) * (x2 - c[1]);
  return std::exp(-r2 / (2.0 * kSinkWidth * kSinkWidth));
}

int cells_at_level(const Params& p, int level) {
  if (level < 0 || level > p.max_level) throw ParameterError("pollutant: level out of range");
  return static_cast<int>(std::lround(p.base_cells * std::exp2(0.5 * level)));
}

namespace {

void validate(const Params& p) {
  if (!(p.eps_visc > 0.0)) throw ParameterError("pollutant: eps_visc must be positive");
  if (!(p.kappa_s > 0.0)) throw ParameterError("pollutant: kappa_s must be positive");
  if (p.base_cells < 2) throw ParameterError("pollutant: base_cells must be at least 2");
  if (p.max_level < 0 || p.max_level > 12) throw ParameterError("pollutant: max_level out of range");
  if (!(p.a_lo < p.a_hi) || !(p.b_lo < p.b_hi))
    throw ParameterError("pollutant: velocity ranges must satisfy lo < hi");
}

}  // namespace

Discretisation::Discretisation(const Params& p, int level, Velocity omega)
    : cells_(cells_at_level(p, level)) {
  const int m = cells_;
  const double hh = 1.0 / m;
  const double eps = p.eps_visc;
  const double diff = eps / (hh * hh);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(unknowns() * 5);

  // Reflect ghost indices back into the grid; -1 marks the Dirichlet column.
  auto neighbour_i = [m](int i) { return i > m ? m - 1 : i; };
  auto neighbour_j = [m](int j) { return j < 0 ? 1 : (j > m ? m - 1 : j); };

  for (int i = 1; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      const std::size_t row = unknown_index(i, j);
      const double x1 = i * hh;
      const double x2 = j * hh;
      const double v1 = omega.b - omega.a * x1;
      const double v2 = omega.a * x2;

      // Coefficients on (W, E, S, N) neighbours and the centre.
      double cw = -diff, ce = -diff, cs = -diff, cn = -diff, cp = 4.0 * diff;
      if (std::abs(v1) * hh / (2.0 * eps) <= 1.0) {
        ce += v1 / (2.0 * hh);
        cw -= v1 / (2.0 * hh);
      } else if (v1 > 0.0) {
        cp += v1 / hh;
        cw -= v1 / hh;
      } else {
        ce += v1 / hh;
        cp -= v1 / hh;
      }
      if (std::abs(v2) * hh / (2.0 * eps) <= 1.0) {
        cn += v2 / (2.0 * hh);
        cs -= v2 / (2.0 * hh);
      } else if (v2 > 0.0) {
        cp += v2 / hh;
        cs -= v2 / hh;
      } else {
        cn += v2 / hh;
        cp -= v2 / hh;
      }

      trips.emplace_back(row, row, cp);
      if (i - 1 >= 1) trips.emplace_back(row, unknown_index(i - 1, j), cw);
      trips.emplace_back(row, unknown_index(neighbour_i(i + 1), j), ce);
      trips.emplace_back(row, unknown_index(i, neighbour_j(j - 1)), cs);
      trips.emplace_back(row, unknown_index(i, neighbour_j(j + 1)), cn);
    }
  }
  a_.resize(static_cast<Eigen::Index>(unknowns()), static_cast<Eigen::Index>(unknowns()));
  a_.setFromTriplets(trips.begin(), trips.end());
  a_.makeCompressed();
}

Eigen::VectorXd Discretisation::sample(const std::function<double(double, double)>& f) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(unknowns()));
  const double hh = h();
  for (int i = 1; i <= cells_; ++i)
    for (int j = 0; j <= cells_; ++j)
      out[static_cast<Eigen::Index>(unknown_index(i, j))] = f(i * hh, j * hh);
  return out;
}

Eigen::VectorXd Discretisation::quadrature_weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(unknowns()));
  const double hh = h();
  for (int i = 1; i <= cells_; ++i)
    for (int j = 0; j <= cells_; ++j) {
      const double wi = i == cells_ ? 0.5 : 1.0;
      const double wj = (j == 0 || j == cells_) ? 0.5 : 1.0;
      w[static_cast<Eigen::Index>(unknown_index(i, j))] = hh * hh * wi * wj;
    }
  return w;
}

GridField Discretisation::to_field(const Eigen::VectorXd& interior, int level) const {
  GridField g;
  g.level = level;
  g.cells = cells_;
  g.u.assign(static_cast<std::size_t>(cells_ + 1) * (cells_ + 1), 0.0);
  for (int i = 1; i <= cells_; ++i)
    for (int j = 0; j <= cells_; ++j)
      g.u[static_cast<std::size_t>(i) * (cells_ + 1) + j] =
          interior[static_cast<Eigen::Index>(unknown_index(i, j))];
  return g;
}

struct Solver::Factor {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

Solver::Solver(const Params& p, int level, Velocity omega)
    : disc_(p, level, omega), lu_(std::make_shared<Factor>()) {
  lu_->lu.compute(disc_.matrix());
  if (lu_->lu.info() != Eigen::Success)
    throw SolverError("pollutant: sparse LU factorisation failed");
}

Eigen::VectorXd Solver::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = lu_->lu.solve(rhs);
  if (lu_->lu.info() != Eigen::Success || !x.allFinite())
    throw SolverError("pollutant: forward solve failed");
  return x;
}

Eigen::VectorXd Solver::solve_transpose(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = lu_->lu.transpose().solve(rhs);
  if (!x.allFinite()) throw SolverError("pollutant: adjoint solve failed");
  return x;
}

namespace {

void check_design(const Design& z) {
  if (z.dim() != kSinkCount) throw ParameterError("pollutant: design must have 9 sink amplitudes");
}

Eigen::VectorXd forcing(const Discretisation& d, const Design& z) {
  return d.sample([&](double x1, double x2) {
    double b = 0.0;
    for (int k = 0; k < kSinkCount; ++k) b += z[k] * sink_bump(k, x1, x2);
    return source(x1, x2) - b;
  });
}

double weighted_square(const Params& p, const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  return 0.5 * p.kappa_s * (w.array() * u.array() * u.array()).sum();
}

std::vector<double> adjoint_gradient(const Params& p, const Solver& s, const Eigen::VectorXd& u) {
  const Discretisation& d = s.discretisation();
  const Eigen::VectorXd w = d.quadrature_weights();
  const Eigen::VectorXd rhs = p.kappa_s * (w.array() * u.array()).matrix();
  const Eigen::VectorXd lambda = s.solve_transpose(rhs);
  std::vector<double> g(kSinkCount);
  for (int k = 0; k < kSinkCount; ++k) {
    const Eigen::VectorXd e = d.sample([k](double x1, double x2) { return sink_bump(k, x1, x2); });
    g[k] = -lambda.dot(e);
  }
  return g;
}

Eigen::VectorXd interior_of(const Discretisation& d, const GridField& f) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(d.unknowns()));
  for (int i = 1; i <= d.cells(); ++i)
    for (int j = 0; j <= d.cells(); ++j)
      u[static_cast<Eigen::Index>(d.unknown_index(i, j))] = f.at(i, j);
  return u;
}

}  // namespace

double qoi(const Params& p, const GridField& field) {
  const int m = field.cells;
  const double hh = 1.0 / m;
  double s = 0.0;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= m; ++j) {
      const double wi = (i == 0 || i == m) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == m) ? 0.5 : 1.0;
      const double u = field.at(i, j);
      s += wi * wj * u * u;
    }
  return 0.5 * p.kappa_s * hh * hh * s;
}

ForwardSolution solve_forward(const Params& p, const Design& z, Velocity omega, int level) {
  validate(p);
  check_design(z);
  const Solver s(p, level, omega);
  const Eigen::VectorXd u = s.solve(forcing(s.discretisation(), z));
  ForwardSolution out;
  out.field = s.discretisation().to_field(u, level);
  out.qoi = weighted_square(p, u, s.discretisation().quadrature_weights());
  return out;
}

std::vector<double> sensitivities(const Params& p, const Design& z, Velocity omega, int level,
                                  const GridField& forward) {
  validate(p);
  check_design(z);
  const Solver s(p, level, omega);
  if (forward.level != level || forward.cells != s.discretisation().cells())
    throw ParameterError("pollutant: forward field does not match level");
  return adjoint_gradient(p, s, interior_of(s.discretisation(), forward));
}

PollutantModel::PollutantModel(Params params) : params_(params) { validate(params_); }

double PollutantModel::level_cost(int level) const {
  const double m = cells_at_level(params_, level);
  return m * m;
}

Velocity PollutantModel::draw_velocity(SeedStream& stream) const {
  const double a = stream.next_uniform(params_.a_lo, params_.a_hi);
  const double b = stream.next_uniform(params_.b_lo, params_.b_hi);
  return {a, b};
}

std::pair<double, std::vector<double>> PollutantModel::evaluate(const Design& z, Velocity omega,
                                                                int level) const {
  check_design(z);
  const Solver s(params_, level, omega);
  const Eigen::VectorXd u = s.solve(forcing(s.discretisation(), z));
  const double q = weighted_square(params_, u, s.discretisation().quadrature_weights());
  return {q, adjoint_gradient(params_, s, u)};
}

CorrelatedSample PollutantModel::sample_pair(const Design& z, int level, SeedStream& stream) const {
  check_request(z, level);
  const Velocity omega = draw_velocity(stream);
  CorrelatedSample s;
  auto [qf, gf] = evaluate(z, omega, level);
  s.q_fine = qf;
  s.grad_fine = std::move(gf);
  s.cost = level_cost(level);
  if (level > 0) {
    auto [qc, gc] = evaluate(z, omega, level - 1);
    s.q_coarse = qc;
    s.grad_coarse = std::move(gc);
    s.cost += level_cost(level - 1);
  }
  return s;
}

}  // namespace cvar_mlmc::pollutant
