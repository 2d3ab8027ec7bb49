#include "cvar_mlmc/fhn.hpp"

#include <cmath>
#include <numbers>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc::fhn {

Coefficients Coefficients::from(const Design& z) {
  if (z.dim() != 4) throw ParameterError("fhn: design must be [a, b, zeta, I]");
  return {z[0], z[1], z[2], z[3]};
}

int steps_at_level(const Params& p, int level) {
  if (level < 0 || level > 30) throw ParameterError("fhn: level out of range");
  return p.base_steps << level;
}

double time_average_square(std::span<const double> v, double dt, double horizon) {
  double q = 0.0;
  for (std::size_t n = 0; n + 1 < v.size(); ++n)
    q += ((v[n] * v[n] + v[n + 1] * v[n + 1]) / 2.0) * (dt / horizon);
  return q;
}

ForwardResult simulate_forward(const Params& p, const Design& z, int level,
                               std::span<const double> noise) {
  const Coefficients c = Coefficients::from(z);
  const int steps = steps_at_level(p, level);
  if (noise.size() != 2 * static_cast<std::size_t>(steps))
    throw ParameterError("fhn: noise must hold 2*N_T increments");
  const double dt = p.horizon / steps;
  const double kick = p.sigma * std::sqrt(dt);

  ForwardResult out;
  Trajectory& tr = out.trajectory;
  tr.level = level;
  tr.v.resize(static_cast<std::size_t>(steps) + 1);
  tr.w.resize(tr.v.size());
  double v = p.v0;
  double w = p.w0;
  tr.v[0] = v;
  tr.w[0] = w;
  for (int n = 0; n < steps; ++n) {
    const double dv = v - v * v * v / 3.0 - w + c.forcing;
    const double dw = c.zeta * (v + c.a - c.b * w);
    v = v + dt * dv + kick * noise[2 * n];
    w = w + dt * dw + kick * noise[2 * n + 1];
    if (!std::isfinite(v) || !std::isfinite(w))
      throw SolverError("fhn: non-finite state at step " + std::to_string(n + 1));
    tr.v[n + 1] = v;
    tr.w[n + 1] = w;
  }
  out.qoi = time_average_square(tr.v, dt, p.horizon);
  return out;
}

std::vector<double> couple_levels(std::span<const double> fine_noise) {
  if (fine_noise.size() % 4 != 0)
    throw ParameterError("fhn: fine noise must cover an even number of steps");
  const std::size_t coarse_steps = fine_noise.size() / 4;
  std::vector<double> coarse(2 * coarse_steps);
  for (std::size_t k = 0; k < coarse_steps; ++k)
    for (std::size_t comp = 0; comp < 2; ++comp)
      coarse[2 * k + comp] = (fine_noise[4 * k + comp] + fine_noise[4 * k + 2 + comp]) /
                             std::numbers::sqrt2;
  return coarse;
}

std::array<double, 2> adjoint_step(double lambda_next, double nu_next, double v_n,
                                   const Coefficients& c, double dt, double horizon,
                                   bool with_source) {
  const double source = with_source ? 2.0 * v_n / horizon : 0.0;
  const double lambda =
      lambda_next + dt * ((1.0 - v_n * v_n) * lambda_next + c.zeta * nu_next + source);
  const double nu = nu_next + dt * (-lambda_next - c.zeta * c.b * nu_next);
  return {lambda, nu};
}

Adjoint solve_adjoint(const Trajectory& traj, const Params& p, const Design& z) {
  const Coefficients c = Coefficients::from(z);
  const int steps = steps_at_level(p, traj.level);
  if (traj.v.size() != static_cast<std::size_t>(steps) + 1 || traj.w.size() != traj.v.size())
    throw ParameterError("fhn: trajectory does not match parameters/level");
  const double dt = p.horizon / steps;
  Adjoint adj;
  adj.lambda.assign(traj.v.size(), 0.0);
  adj.nu.assign(traj.v.size(), 0.0);
  adj.lambda[steps] = dt * traj.v[steps] / p.horizon;
  adj.nu[steps] = 0.0;
  for (int n = steps - 1; n >= 1; --n) {
    const auto [l, m] = adjoint_step(adj.lambda[n + 1], adj.nu[n + 1], traj.v[n], c, dt, p.horizon);
    adj.lambda[n] = l;
    adj.nu[n] = m;
  }
  return adj;
}

std::array<double, 4> sensitivities(const Trajectory& traj, const Adjoint& adj,
                                    const Params& p, const Design& z) {
  const Coefficients c = Coefficients::from(z);
  const std::size_t steps = traj.v.size() - 1;
  if (adj.lambda.size() != traj.v.size() || adj.nu.size() != traj.v.size())
    throw ParameterError("fhn: adjoint does not match trajectory");
  const double dt = p.horizon / static_cast<double>(steps);
  double qa = 0.0, qb = 0.0, qzeta = 0.0, qi = 0.0;
  for (std::size_t n = 0; n < steps; ++n) {
    const double nu = adj.nu[n + 1];
    qa += dt * c.zeta * nu;
    qb += -dt * c.zeta * traj.w[n] * nu;
    qzeta += dt * (traj.v[n] + c.a - c.b * traj.w[n]) * nu;
    qi += dt * adj.lambda[n + 1];
  }
  return {qa, qb, qzeta, qi};
}

FhnModel::FhnModel(Params params) : params_(params) {
  if (!(params_.horizon > 0.0)) throw ParameterError("fhn: T must be positive");
  if (params_.base_steps < 1) throw ParameterError("fhn: N_T0 must be at least 1");
  if (!(params_.sigma >= 0.0)) throw ParameterError("fhn: sigma must be non-negative");
  if (params_.max_level < 1 || params_.max_level > 20)
    throw ParameterError("fhn: max_level must be in [1, 20]");
}

double FhnModel::level_cost(int level) const {
  return static_cast<double>(steps_at_level(params_, level));
}

CorrelatedSample FhnModel::sample_pair(const Design& z, int level, SeedStream& stream) const {
  check_request(z, level);
  const int steps = steps_at_level(params_, level);
  const std::vector<double> noise =
      draw(stream, DrawSpec::normal(), 2 * static_cast<std::size_t>(steps));

  auto solve = [&](int lvl, std::span<const double> xi, double& q, std::vector<double>& grad) {
    const ForwardResult fwd = simulate_forward(params_, z, lvl, xi);
    const Adjoint adj = solve_adjoint(fwd.trajectory, params_, z);
    const auto g = sensitivities(fwd.trajectory, adj, params_, z);
    q = fwd.qoi;
    grad.assign(g.begin(), g.end());
  };

  CorrelatedSample s;
  solve(level, noise, s.q_fine, s.grad_fine);
  s.cost = level_cost(level);
  if (level > 0) {
    const std::vector<double> coarse_noise = couple_levels(noise);
    double qc = 0.0;
    std::vector<double> gc;
    solve(level - 1, coarse_noise, qc, gc);
    s.q_coarse = qc;
    s.grad_coarse = std::move(gc);
    s.cost += level_cost(level - 1);
  }
  return s;
}

}  // namespace cvar_mlmc::fhn
