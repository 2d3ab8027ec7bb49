#include "cvar_mlmc/cmlmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {

std::vector<std::int64_t> allocate_samples(const std::vector<double>& variance,
                                           const std::vector<double>& cost, double eps_stat,
                                           double safety) {
  if (variance.size() != cost.size() || variance.empty())
    throw ParameterError("allocate_samples: need one variance and cost per level");
  if (!(eps_stat > 0.0)) throw ParameterError("allocate_samples: eps_s must be positive");
  if (!(safety > 0.0)) throw ParameterError("allocate_samples: safety must be positive");
  double sum = 0.0;
  for (std::size_t l = 0; l < variance.size(); ++l) {
    if (!(variance[l] >= 0.0)) throw ParameterError("allocate_samples: V_l must be >= 0");
    if (!(cost[l] > 0.0)) throw ParameterError("allocate_samples: C_l must be > 0");
    sum += std::sqrt(variance[l] * cost[l]);
  }
  std::vector<std::int64_t> n(variance.size(), 2);
  for (std::size_t l = 0; l < variance.size(); ++l) {
    const double want =
        safety / (eps_stat * eps_stat) * std::sqrt(variance[l] / cost[l]) * sum;
    if (want > 2.0) n[l] = static_cast<std::int64_t>(std::ceil(want));
  }
  return n;
}

GridChoice select_grid_size(int n, double interp_error, double eps_interp, int n_max) {
  if (n < 4) throw ParameterError("select_grid_size: n must be at least 4");
  if (!(eps_interp > 0.0)) throw ParameterError("select_grid_size: eps_i must be positive");
  GridChoice out{n, false};
  if (interp_error <= eps_interp) return out;
  int candidate = 9;
  while (candidate <= n) candidate = 2 * (candidate - 1) + 1;
  for (;; candidate = 2 * (candidate - 1) + 1) {
    if (candidate > n_max) {
      out.n = std::max(n, n_max);
      out.capped = true;
      return out;
    }
    const double ratio = static_cast<double>(n - 1) / (candidate - 1);
    if (interp_error * ratio * ratio * ratio <= eps_interp) {
      out.n = candidate;
      return out;
    }
  }
}

namespace {

// Least-squares slope of y against x.
std::optional<double> slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

RateEstimates fit_rates(const ErrorBreakdown& err, const std::vector<double>& level_costs,
                        int refinement, const RateEstimates& prior) {
  RateEstimates r = prior;
  const double ls = std::log(static_cast<double>(refinement));
  const std::size_t levels = err.level_variance.size();
  if (levels >= 3 && !err.alpha.empty()) r.alpha = median(err.alpha);

  std::vector<double> x, y;
  for (std::size_t l = 1; l < levels; ++l)
    if (err.level_variance[l] > 0.0) {
      x.push_back(static_cast<double>(l));
      y.push_back(std::log(err.level_variance[l]));
    }
  if (auto b = slope(x, y)) r.beta = -*b / ls;

  x.clear();
  y.clear();
  for (std::size_t l = 0; l < level_costs.size(); ++l) {
    x.push_back(static_cast<double>(l));
    y.push_back(std::log(level_costs[l]));
  }
  if (auto g = slope(x, y); g && *g > 0.0) r.gamma = *g / ls;
  return r;
}

std::vector<double> pair_costs(const Model& model, int max_level) {
  std::vector<double> c(static_cast<std::size_t>(max_level) + 1);
  for (int l = 0; l <= max_level; ++l)
    c[l] = model.level_cost(l) + (l > 0 ? model.level_cost(l - 1) : 0.0);
  return c;
}

double hierarchy_cost(const Model& model, const Hierarchy& h) {
  const auto c = pair_costs(model, h.max_level);
  double total = 0.0;
  for (int l = 0; l <= h.max_level; ++l) total += static_cast<double>(h.samples[l]) * c[l];
  return total;
}

std::vector<double> pooled_samples(const std::vector<LevelBatch>& batches,
                                   const ErrorSettings& settings) {
  if (batches.empty()) throw InsufficientSamplesError("no levels to pool");
  // Finest level with enough samples: coarse levels can be biased by more
  // than the spread of Q.
  const auto enough = std::max<std::int64_t>(settings.kde_min_samples, 8);
  std::size_t level = 0;
  for (std::size_t l = batches.size(); l-- > 0;)
    if (static_cast<std::int64_t>(batches[l].size()) >= enough) {
      level = l;
      break;
    }
  std::vector<double> q;
  q.reserve(batches[level].size());
  for (const auto& smp : batches[level].samples) q.push_back(smp.q_fine);
  return q;
}

namespace {

std::vector<double> single_costs(const Model& model, int max_level) {
  std::vector<double> c;
  for (int l = 0; l <= max_level; ++l) c.push_back(model.level_cost(l));
  return c;
}

struct Evaluation {
  ParametricEstimates estimates;
  ErrorBreakdown errors;
};

Evaluation evaluate_on(const std::vector<LevelBatch>& batches, const Interval& theta,
                       const Hierarchy& h, const Design& z, const CmlmcSettings& settings,
                       std::uint64_t seed, std::uint64_t iteration, int round) {
  const ThetaGrid grid(theta.lo, theta.hi, h.grid_size);
  ErrorBreakdown err = estimate_errors(batches, grid, settings.tau, h.refinement, settings.errors,
                                       seed, bootstrap_tag(iteration, round, 0));
  PhiPsiPointwise pw = pointwise_from_batches(batches, grid, settings.tau);
  return {build_functionals(std::move(pw), grid, z, settings.tau, batches), std::move(err)};
}

// Evaluates on Θ and, while the Φ̂ minimiser sits on an edge of a Θ that is
// not fixed, grows Θ by one width on that side at constant spacing.
Evaluation evaluate(const std::vector<LevelBatch>& batches, Interval& theta, Hierarchy& h,
                    const Design& z, const CmlmcSettings& settings, bool fixed,
                    std::uint64_t seed, std::uint64_t iteration, int round) {
  for (int grow = 0;; ++grow) {
    const ThetaGrid grid(theta.lo, theta.hi, h.grid_size);
    PhiPsiPointwise pw = pointwise_from_batches(batches, grid, settings.tau);
    const Spline phi = Spline::fit(grid, pw.phi);
    const SplineMinimum m = argmin_on_interval(phi);
    const bool at_lo = m.theta <= theta.lo;
    const bool at_hi = m.theta >= theta.hi;
    if (fixed || grow >= 4 || !(at_lo || at_hi) || 2 * (h.grid_size - 1) + 1 > settings.n_max)
      break;
    const double w = theta.width();
    theta = at_lo ? Interval{theta.lo - w, theta.hi} : Interval{theta.lo, theta.hi + w};
    h.grid_size = 2 * (h.grid_size - 1) + 1;
  }
  return evaluate_on(batches, theta, h, z, settings, seed, iteration, round);
}

Interval choose_theta(const std::vector<LevelBatch>& batches, const ThetaPolicy& policy,
                      const CmlmcSettings& settings) {
  if (policy.fixed) return *policy.fixed;
  return select_theta_interval(pooled_samples(batches, settings.errors), settings.tau,
                               policy.previous_theta, policy.previous_interval);
}

void check_settings(const CmlmcSettings& s) {
  if (!(s.tau > 0.0 && s.tau < 1.0)) throw ParameterError("cmlmc: tau must lie in (0, 1)");
  const ToleranceSplit& p = s.split;
  if (!(p.interp > 0.0 && p.bias > 0.0 && p.stat > 0.0) ||
      std::fabs(p.interp + p.bias + p.stat - 1.0) > 1e-9)
    throw ParameterError("cmlmc: tolerance split must be positive and sum to 1");
  if (!(s.ratio > 1.0)) throw ParameterError("cmlmc: schedule ratio must exceed 1");
  if (s.max_rounds < 1) throw ParameterError("cmlmc: max_rounds must be at least 1");
}

}  // namespace

ScreeningResult screening(const Model& model, const Design& z, const Hierarchy& screen,
                          const CmlmcSettings& settings, const ThetaPolicy& theta,
                          std::uint64_t seed, std::uint64_t iteration) {
  check_settings(settings);
  screen.validate();
  auto batches = simulate_batches(model, z, screen, seed, iteration_tag(iteration));
  Interval interval = choose_theta(batches, theta, settings);
  Hierarchy h = screen;
  Evaluation ev = evaluate(batches, interval, h, z, settings, theta.fixed.has_value(), seed,
                           iteration, 0);
  const RateEstimates rates = fit_rates(ev.errors, single_costs(model, h.max_level),
                                        h.refinement);
  return {std::move(ev.estimates), std::move(ev.errors), rates, h, interval};
}

CmlmcResult run_cmlmc(const Model& model, const Design& z, double target_tol,
                      const CmlmcSettings& settings, const std::optional<WarmStart>& warm,
                      const ThetaPolicy& theta, std::uint64_t seed, std::uint64_t iteration) {
  check_settings(settings);
  if (!(target_tol > 0.0)) throw ParameterError("cmlmc: target tolerance must be positive");

  Hierarchy h = warm ? warm->hierarchy : settings.screen;
  h.validate();
  if (h.max_level < 1) throw ParameterError("cmlmc: hierarchy needs at least two levels");
  if (h.max_level > model.max_level()) throw ParameterError("cmlmc: L exceeds the model's levels");
  RateEstimates rates = warm ? warm->rates : RateEstimates{};
  const double s = h.refinement;
  const std::uint64_t tag = iteration_tag(iteration);

  std::vector<LevelBatch> batches = simulate_batches(model, z, h, seed, tag);
  Interval interval = choose_theta(batches, theta, settings);
  const bool fixed = theta.fixed.has_value();
  Evaluation ev = evaluate(batches, interval, h, z, settings, fixed, seed, iteration, 0);
  rates = fit_rates(ev.errors, single_costs(model, h.max_level), h.refinement, rates);

  CmlmcResult out{std::move(ev.estimates), std::move(ev.errors), h, rates, interval, {}, 0.0,
                  false, false};
  out.rounds.push_back({0, 0.0, h, out.errors, hierarchy_cost(model, h), false});

  const double tol_sq = target_tol * target_tol;
  const double first_err = std::sqrt(out.errors.total_mse_sq());
  const int steps =
      std::max(1, static_cast<int>(std::ceil(std::log(first_err / target_tol) / std::log(settings.ratio))));

  for (int round = 1; out.errors.total_mse_sq() > tol_sq; ++round) {
    if (round > settings.max_rounds)
      throw ConvergenceError("cmlmc: tolerance not reached within max_rounds", out.errors);
    const double eps = target_tol * std::pow(settings.ratio, std::max(0, steps - round));
    const ErrorBreakdown& err = out.errors;
    const std::size_t nt = err.targets.size();

    // Grid size from the h_θ³ law.
    const GridChoice grid = select_grid_size(h.grid_size, std::sqrt(err.interp_sq()),
                                             std::sqrt(settings.split.interp) * eps,
                                             settings.n_max);
    out.grid_capped = out.grid_capped || grid.capped;

    // Levels: on the first adaptation of a cold start the screening depth may
    // shrink to the shallowest measured level that already meets the bias
    // budget; after that L only grows.
    const double bias_budget = std::sqrt(settings.split.bias) * eps;
    int new_l = h.max_level;
    if (round == 1 && !warm) {
      for (int l = 1; l < h.max_level; ++l) {
        double b2 = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
          const double a = std::max(err.alpha[t], 0.25);
          const double d = err.level_bias[t][l] / (std::pow(s, a) - 1.0);
          b2 += d * d;
        }
        if (std::sqrt(b2) <= bias_budget) {
          new_l = l;
          break;
        }
      }
    }
    std::vector<double> bias(nt);
    for (std::size_t t = 0; t < nt; ++t) bias[t] = std::sqrt(err.targets[t].bias_sq);
    auto bias_norm = [&] {
      double b2 = 0.0;
      for (double b : bias) b2 += b * b;
      return std::sqrt(b2);
    };
    while (new_l >= h.max_level && bias_norm() > bias_budget && new_l < model.max_level()) {
      ++new_l;
      for (std::size_t t = 0; t < nt; ++t) bias[t] *= std::pow(s, -std::max(err.alpha[t], 0.25));
    }

    // Variance proxies; unseen levels extrapolated with β̂.
    std::vector<double> v(static_cast<std::size_t>(new_l) + 1);
    const int measured = h.max_level;
    for (int l = 0; l <= new_l; ++l)
      v[l] = l <= measured ? err.level_variance[l]
                           : err.level_variance[measured] *
                                 std::pow(s, -std::max(rates.beta, 0.0) * (l - measured));
    const auto cost = pair_costs(model, new_l);
    auto n = allocate_samples(v, cost, std::sqrt(settings.split.stat) * eps, settings.safety);
    // Every level keeps enough samples for its variance and bias estimates
    // to mean something; two samples can easily both miss the tail.
    const auto floor_n = std::max<std::int64_t>(settings.errors.kde_min_samples, 2);
    for (auto& nl : n) nl = std::max(nl, floor_n);
    for (int l = 0; l <= std::min(new_l, h.max_level); ++l) n[l] = std::max(n[l], h.samples[l]);
    if (new_l < h.max_level) batches.resize(static_cast<std::size_t>(new_l) + 1);

    h = Hierarchy{new_l, n, grid.n, h.refinement};
    extend_batches(model, z, h, seed, tag, batches);
    interval = choose_theta(batches, theta, settings);
    ev = evaluate(batches, interval, h, z, settings, fixed, seed, iteration, round);
    rates = fit_rates(ev.errors, single_costs(model, h.max_level), h.refinement, rates);
    out.estimates = std::move(ev.estimates);
    out.errors = std::move(ev.errors);
    out.rounds.push_back({round, eps, h, out.errors, hierarchy_cost(model, h), grid.capped});
  }
  out.hierarchy = h;
  out.rates = rates;
  out.theta_interval = interval;
  out.hierarchy_cost = hierarchy_cost(model, h);
  out.converged = true;
  return out;
}

nlohmann::json to_json(const Hierarchy& h) {
  return {{"L", h.max_level}, {"N", h.samples}, {"n", h.grid_size}, {"s", h.refinement}};
}

nlohmann::json to_json(const ErrorBreakdown& e) {
  nlohmann::json targets = nlohmann::json::array();
  for (std::size_t t = 0; t < e.targets.size(); ++t) {
    const auto& c = e.targets[t];
    targets.push_back({{"target", t == 0 ? std::string("phi_prime")
                                         : "psi_prime_" + std::to_string(t)},
                       {"interp_sq", c.interp_sq},
                       {"bias_sq", c.bias_sq},
                       {"stat_sq", c.stat_sq}});
  }
  return {{"targets", targets},
          {"interp_sq", e.interp_sq()},
          {"bias_sq", e.bias_sq()},
          {"stat_sq", e.stat_sq()},
          {"total_mse_sq", e.total_mse_sq()},
          {"rmse", std::sqrt(e.total_mse_sq())},
          {"alpha", e.alpha},
          {"level_variance", e.level_variance},
          {"kde_level", e.kde_level},
          {"bias_rate_fallback", e.bias_rate_fallback}};
}

nlohmann::json to_json(const RateEstimates& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"gamma", r.gamma}};
}

nlohmann::json to_json(const RoundRecord& r) {
  return {{"round", r.round},
          {"target", r.target},
          {"hierarchy", to_json(r.hierarchy)},
          {"errors", to_json(r.errors)},
          {"hierarchy_cost", r.hierarchy_cost},
          {"grid_capped", r.grid_capped}};
}

}  // namespace cvar_mlmc
