#include "cvar_mlmc/amgd.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {

void OuuProblem::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("problem: tau must lie in (0, 1)");
  if (!(kappa >= 0.0)) throw ParameterError("problem: kappa must be non-negative");
  if (z0.dim() == 0 || z0.dim() != z_ref.dim())
    throw ParameterError("problem: z0 and z_ref must have the same non-zero dimension");
  if (!(alpha > 0.0)) throw ParameterError("problem: step size must be positive");
  if (!(eta > 0.0)) throw ParameterError("problem: eta must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("problem: eps must lie in (0, 1)");
  if (max_iters < 1) throw ParameterError("problem: max_iters must be at least 1");
}

CmlmcOracle::CmlmcOracle(const Model& model, CmlmcSettings settings, std::uint64_t seed)
    : model_(model), settings_(std::move(settings)), seed_(seed) {}

namespace {

// Grows Θ by one width on the side where the minimiser got stuck, keeping
// the grid spacing.
Interval regrow(const Interval& theta, bool at_lower) {
  const double w = theta.width();
  return at_lower ? Interval{theta.lo - w, theta.hi} : Interval{theta.lo, theta.hi + w};
}

}  // namespace

OracleReply CmlmcOracle::estimate(const OracleRequest& req) {
  const auto j = static_cast<std::uint64_t>(req.iteration);
  const ThetaPolicy policy{std::nullopt, req.previous_theta, req.previous_interval};
  OracleReply reply;
  ErrorBreakdown errors;
  Hierarchy h;
  std::optional<ParametricEstimates> est;
  Interval interval;
  rounds_.clear();
  if (!req.target_tol) {
    ScreeningResult scr = screening(model_, req.z, settings_.screen, settings_, policy, seed_, j);
    warm_ = WarmStart{scr.hierarchy, scr.rates};
    errors = scr.errors;
    h = scr.hierarchy;
    interval = scr.theta_interval;
    est.emplace(std::move(scr.estimates));
  } else {
    CmlmcResult res = run_cmlmc(model_, req.z, *req.target_tol, settings_, warm_, policy, seed_, j);
    warm_ = WarmStart{res.hierarchy, res.rates};
    errors = res.errors;
    h = res.hierarchy;
    interval = res.theta_interval;
    rounds_ = res.rounds;
    est.emplace(std::move(res.estimates));
  }

  VarCvar vc = extract_var_cvar(*est);
  if (vc.on_boundary) {
    // Same samples, wider Θ, same spacing.
    interval = regrow(interval, vc.var <= interval.lo);
    const int n = 2 * (h.grid_size - 1) + 1;
    const ThetaGrid grid(interval.lo, interval.hi, n);
    PhiPsiPointwise pw = pointwise_from_batches(est->batches, grid, settings_.tau);
    auto batches = std::move(est->batches);
    est.emplace(build_functionals(std::move(pw), grid, req.z, settings_.tau, std::move(batches)));
    vc = extract_var_cvar(*est);
    if (vc.on_boundary)
      throw std::runtime_error("amgd: theta minimiser still on the boundary after regrowing");
    reply.regrown = true;
  }

  reply.theta = vc.var;
  reply.phi = vc.cvar;
  reply.phi_prime = est->phi_prime(vc.var);
  reply.psi_prime.resize(est->dimension());
  for (std::size_t k = 0; k < est->dimension(); ++k) reply.psi_prime[k] = est->psi_prime(k, vc.var);
  reply.interval = interval;
  reply.cost = hierarchy_cost(model_, h);
  reply.hierarchy = h;
  reply.errors = errors;
  reply.samples = pooled_samples(est->batches, settings_.errors);
  last_ = std::move(est);
  return reply;
}

OracleReply LinearGaussianExactOracle::estimate(const OracleRequest& req) {
  if (req.z.dim() != 1) throw ParameterError("linear-Gaussian oracle: design must be scalar");
  const boost::math::normal n01;
  const double zq = boost::math::quantile(n01, tau_);
  OracleReply r;
  r.theta = req.z[0] + sigma_ * zq;
  r.phi = req.z[0] + sigma_ * boost::math::pdf(n01, zq) / (1.0 - tau_);
  r.phi_prime = 0.0;
  // E[1{Q ≥ q_τ} · 1] / (1 - τ) = 1.
  r.psi_prime = {1.0};
  r.interval = {r.theta - 1.0, r.theta + 1.0};
  return r;
}

namespace {

OptState make_state(int j, const Design& z, const OracleReply& r, const OuuProblem& p,
                    double target_tol) {
  OptState s;
  s.j = j;
  s.z = z;
  s.theta = r.theta;
  s.interval = r.interval;
  s.phi_prime = r.phi_prime;
  s.cvar = r.phi;
  s.var = r.theta;
  s.target_tol = target_tol;
  s.iteration_cost = r.cost;
  s.hierarchy = r.hierarchy;
  s.errors = r.errors;
  s.samples = r.samples;
  if (r.psi_prime.size() != z.dim()) throw ParameterError("amgd: oracle gradient has wrong size");
  s.gradient.resize(z.dim());
  double penalty = 0.0, norm2 = 0.0;
  for (std::size_t k = 0; k < z.dim(); ++k) {
    const double dz = z[k] - p.z_ref[k];
    penalty += dz * dz;
    s.gradient[k] = r.psi_prime[k] + 2.0 * p.kappa * dz;
    norm2 += s.gradient[k] * s.gradient[k];
  }
  s.gradient_norm = std::sqrt(norm2);
  s.objective = r.phi + p.kappa * penalty;
  return s;
}

}  // namespace

OptState initial_state(const OuuProblem& problem, GradientOracle& oracle) {
  problem.validate();
  OracleRequest req;
  req.iteration = 0;
  req.z = problem.z0;
  OptState s = make_state(0, problem.z0, oracle.estimate(req), problem, 0.0);
  s.residual = 1.0;
  s.cumulative_cost = s.iteration_cost;
  return s;
}

OptState iterate(const OptState& state, const OuuProblem& problem, GradientOracle& oracle,
                 double initial_norm) {
  std::vector<double> next(state.z.dim());
  for (std::size_t k = 0; k < next.size(); ++k)
    next[k] = state.z[k] - problem.alpha * state.gradient[k];
  OracleRequest req;
  req.iteration = state.j + 1;
  req.z = Design(std::move(next));
  // MSE ≤ η² ‖Ĵ_w(w_j)‖², with the estimated norm standing in for the true one.
  req.target_tol = problem.eta * state.gradient_norm;
  req.previous_theta = state.theta;
  req.previous_interval = state.interval;
  if (!(*req.target_tol > 0.0))
    throw std::runtime_error("amgd: gradient vanished; nothing left to resolve");
  OptState s = make_state(state.j + 1, req.z, oracle.estimate(req), problem, *req.target_tol);
  s.residual = initial_norm > 0.0 ? (s.gradient_norm * s.gradient_norm) /
                                        (initial_norm * initial_norm)
                                  : 0.0;
  s.cumulative_cost = state.cumulative_cost + s.iteration_cost;
  return s;
}

AmgdResult run_amgd(const OuuProblem& problem, GradientOracle& oracle,
                    const std::function<void(const OptState&)>& observer) {
  AmgdResult out;
  out.history.push_back(initial_state(problem, oracle));
  if (observer) observer(out.history.back());
  const double initial_norm = out.history.front().gradient_norm;
  if (initial_norm == 0.0) {
    out.converged = true;
    return out;
  }
  while (out.history.back().residual > problem.eps) {
    if (out.history.back().j >= problem.max_iters) return out;
    out.history.push_back(iterate(out.history.back(), problem, oracle, initial_norm));
    if (observer) observer(out.history.back());
  }
  out.converged = true;
  return out;
}

}  // namespace cvar_mlmc
