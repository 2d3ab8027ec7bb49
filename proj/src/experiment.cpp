#include "cvar_mlmc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "cvar_mlmc/amgd.hpp"
#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/parallel.hpp"

namespace cvar_mlmc {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> Reference::gradient_at(double t) const {
  if (!covers(t)) throw DomainError("reference does not cover theta " + std::to_string(t));
  const std::size_t n = theta.size();
  auto it = std::upper_bound(theta.begin(), theta.end(), t);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - theta.begin()), n - 1);
  const std::size_t lo = hi == 0 ? 0 : hi - 1;
  if (hi == lo) hi = lo + 1;
  const double w = (t - theta[lo]) / (theta[hi] - theta[lo]);
  std::vector<double> g{phi_prime[lo] + w * (phi_prime[hi] - phi_prime[lo])};
  for (const auto& p : psi_prime) g.push_back(p[lo] + w * (p[hi] - p[lo]));
  return g;
}

Reference make_reference(const Model& model, const Design& z, double tau, std::int64_t samples,
                         int level, int grid_points, std::uint64_t seed) {
  if (samples < 100) throw ParameterError("reference: need at least 100 samples");
  if (grid_points < 10) throw ParameterError("reference: need at least 10 grid points");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  if (level < 0 || level > model.max_level()) throw ParameterError("reference: bad level");
  const std::size_t n = static_cast<std::size_t>(samples);
  const std::size_t d = model.dimension();
  std::vector<double> q(n);
  std::vector<std::vector<double>> g(n);
  parallel_for(n, [&](std::size_t i) {
    SeedStream stream(seed, static_cast<std::uint64_t>(level), i, reference_tag(0));
    CorrelatedSample s;
    try {
      s = model.sample_pair(z, level, stream);
    } catch (const SolverError& e) {
      throw SampleError(e.what(), level, seed, i, reference_tag(0));
    }
    q[i] = s.q_fine;
    g[i] = std::move(s.grad_fine);
  });

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return q[a] < q[b]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = q[order[i]];

  Reference ref;
  ref.z = z.values();
  ref.tau = tau;
  ref.level = level;
  ref.samples = samples;
  ref.var = empirical_quantile(sorted, tau);
  double excess = 0.0;
  for (double v : sorted) excess += std::max(v - ref.var, 0.0);
  ref.cvar = ref.var + excess / (static_cast<double>(n) * (1.0 - tau));

  double lo = empirical_quantile(sorted, std::max(tau - 0.3, 0.01));
  double hi = empirical_quantile(sorted, std::min(tau + 0.3, 0.99));
  if (!(hi > lo)) {
    lo = ref.var - 0.5;
    hi = ref.var + 0.5;
  }
  // Tail sums over samples with Q ≥ θ, sweeping θ upwards.
  std::vector<double> tail_g(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) tail_g[k] += g[i][k];
  std::size_t p = 0;
  ref.psi_prime.assign(d, std::vector<double>(static_cast<std::size_t>(grid_points)));
  for (int r = 0; r < grid_points; ++r) {
    const double t = r == grid_points - 1 ? hi : lo + r * (hi - lo) / (grid_points - 1);
    while (p < n && sorted[p] < t) {
      for (std::size_t k = 0; k < d; ++k) tail_g[k] -= g[order[p]][k];
      ++p;
    }
    const double above = static_cast<double>(n - p);
    ref.theta.push_back(t);
    ref.phi_prime.push_back(1.0 - above / (static_cast<double>(n) * (1.0 - tau)));
    for (std::size_t k = 0; k < d; ++k)
      ref.psi_prime[k][r] = tail_g[k] / (static_cast<double>(n) * (1.0 - tau));
  }
  return ref;
}

json to_json(const Reference& r) {
  return {{"z", r.z},           {"tau", r.tau},          {"level", r.level},
          {"samples", r.samples}, {"var", r.var},        {"cvar", r.cvar},
          {"theta", r.theta},   {"phi_prime", r.phi_prime}, {"psi_prime", r.psi_prime}};
}

Reference reference_from_json(const json& j) {
  Reference r;
  try {
    r.z = j.at("z").get<std::vector<double>>();
    r.tau = j.at("tau").get<double>();
    r.level = j.at("level").get<int>();
    r.samples = j.at("samples").get<std::int64_t>();
    r.var = j.at("var").get<double>();
    r.cvar = j.at("cvar").get<double>();
    r.theta = j.at("theta").get<std::vector<double>>();
    r.phi_prime = j.at("phi_prime").get<std::vector<double>>();
    r.psi_prime = j.at("psi_prime").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ConfigError("experiment.reference.file", std::string("malformed reference: ") + e.what());
  }
  if (r.theta.size() < 2 || r.phi_prime.size() != r.theta.size())
    throw ConfigError("experiment.reference.file", "reference grid is inconsistent");
  return r;
}

TrueError true_gradient_error(const ParametricEstimates& est, double theta_hat,
                              const Reference& ref) {
  if (ref.psi_prime.size() != est.dimension())
    throw ParameterError("reference dimension does not match the estimates");
  auto estimate_at = [&](double t) {
    std::vector<double> g{est.phi_prime(t)};
    for (std::size_t k = 0; k < est.dimension(); ++k) g.push_back(est.psi_prime(k, t));
    return g;
  };
  TrueError out;
  {
    const auto e = estimate_at(theta_hat);
    const auto r = ref.gradient_at(theta_hat);
    double s = 0.0;
    for (std::size_t t = 0; t < e.size(); ++t) s += (e[t] - r[t]) * (e[t] - r[t]);
    out.pointwise = std::sqrt(s);
  }
  const ThetaGrid probe = est.grid.dense();
  std::vector<double> sup(est.dimension() + 1, 0.0);
  for (int i = 0; i < probe.size(); ++i) {
    const double t = probe.point(i);
    if (!ref.covers(t)) continue;
    const auto e = estimate_at(t);
    const auto r = ref.gradient_at(t);
    for (std::size_t k = 0; k < e.size(); ++k) sup[k] = std::max(sup[k], std::fabs(e[k] - r[k]));
  }
  double s = 0.0;
  for (double v : sup) s += v * v;
  out.sup = std::sqrt(s);
  return out;
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << std::setprecision(17);
  return f;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

std::string join_counts(const std::vector<std::int64_t>& n) {
  std::string s;
  for (std::size_t i = 0; i < n.size(); ++i) s += (i ? ";" : "") + std::to_string(n[i]);
  return s;
}

ThetaPolicy policy_for(const ExperimentConfig& cfg) {
  ThetaPolicy p;
  p.fixed = cfg.theta_interval;
  return p;
}

int reference_level(const ExperimentConfig& cfg, const Model& model) {
  return cfg.reference.level ? *cfg.reference.level : std::min(model.max_level(), 6);
}

Reference obtain_reference(const ExperimentConfig& cfg, const Model& model) {
  if (cfg.reference.file) {
    std::ifstream f(*cfg.reference.file);
    if (!f) throw ConfigError("experiment.reference.file", "cannot open " + cfg.reference.file->string());
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ConfigError("experiment.reference.file", e.what());
    }
    return reference_from_json(j);
  }
  return make_reference(model, Design(cfg.z0), cfg.tau, cfg.reference.samples,
                        reference_level(cfg, model), cfg.reference.grid_points, cfg.seed);
}

void run_estimate(const ExperimentConfig& cfg, const Model& model) {
  const CmlmcResult res = run_cmlmc(model, Design(cfg.z0), cfg.tolerances.front(), cfg.mlmc,
                                    std::nullopt, policy_for(cfg), cfg.seed, 0);
  write_estimates_csv(cfg.out_dir / "estimates.csv", res.estimates, res.estimates.grid.dense());
  const VarCvar vc = extract_var_cvar(res.estimates);
  json out = {{"model", model.name()},
              {"tolerance", cfg.tolerances.front()},
              {"var", vc.var},
              {"cvar", vc.cvar},
              {"var_on_boundary", vc.on_boundary},
              {"theta_interval", {res.theta_interval.lo, res.theta_interval.hi}},
              {"hierarchy", to_json(res.hierarchy)},
              {"hierarchy_cost", res.hierarchy_cost},
              {"rates", to_json(res.rates)},
              {"errors", to_json(res.errors)}};
  write_json(cfg.out_dir / "errors.json", out);
  json log = json::array();
  for (const auto& r : res.rounds) log.push_back(to_json(r));
  write_json(cfg.out_dir / "hierarchy_log.json", log);
}

void run_reliability(const ExperimentConfig& cfg, const Model& model) {
  const Reference ref = obtain_reference(cfg, model);
  if (!cfg.reference.file) write_json(cfg.out_dir / "reference.json", to_json(ref));
  auto f = open_out(cfg.out_dir / "reliability.csv");
  f << "run,tolerance,estimated_rmse,true_pointwise_error,true_sup_error,theta_hat,cvar,"
       "hierarchy_cost\n";
  for (double tol : cfg.tolerances) {
    for (int r = 0; r < cfg.repeats; ++r) {
      const CmlmcResult res = run_cmlmc(model, Design(cfg.z0), tol, cfg.mlmc, std::nullopt,
                                        policy_for(cfg), cfg.seed + 1 + r, 0);
      const VarCvar vc = extract_var_cvar(res.estimates);
      const TrueError te = true_gradient_error(res.estimates, vc.var, ref);
      f << r << ',' << tol << ',' << std::sqrt(res.errors.total_mse_sq()) << ',' << te.pointwise
        << ',' << te.sup << ',' << vc.var << ',' << vc.cvar << ',' << res.hierarchy_cost << '\n';
    }
  }
}

void run_complexity(const ExperimentConfig& cfg, const Model& model) {
  auto f = open_out(cfg.out_dir / "complexity.csv");
  f << "run,tolerance,total_cost,L,n,N_l,estimated_rmse,rounds\n";
  for (double tol : cfg.tolerances) {
    for (int r = 0; r < cfg.repeats; ++r) {
      const CmlmcResult res = run_cmlmc(model, Design(cfg.z0), tol, cfg.mlmc, std::nullopt,
                                        policy_for(cfg), cfg.seed + 1 + r, 0);
      f << r << ',' << tol << ',' << res.hierarchy_cost << ',' << res.hierarchy.max_level << ','
        << res.hierarchy.grid_size << ',' << join_counts(res.hierarchy.samples) << ','
        << std::sqrt(res.errors.total_mse_sq()) << ',' << res.rounds.size() << '\n';
    }
  }
}

void write_history(const fs::path& p, const std::vector<OptState>& history) {
  auto f = open_out(p);
  const std::size_t d = history.front().z.dim();
  f << "j";
  for (std::size_t k = 0; k < d; ++k) f << ",z_" << k + 1;
  f << ",theta,objective,cvar,var,residual,gradient_norm,target_tol,iteration_cost,"
       "cumulative_cost,L,n\n";
  for (const auto& s : history) {
    f << s.j;
    for (std::size_t k = 0; k < d; ++k) f << ',' << s.z[k];
    f << ',' << s.theta << ',' << s.objective << ',' << s.cvar << ',' << s.var << ','
      << s.residual << ',' << s.gradient_norm << ',' << s.target_tol << ',' << s.iteration_cost
      << ',' << s.cumulative_cost << ',' << (s.hierarchy ? s.hierarchy->max_level : -1) << ','
      << (s.hierarchy ? s.hierarchy->grid_size : -1) << '\n';
  }
}

void run_optimize(const ExperimentConfig& cfg, const Model& model) {
  OuuProblem problem;
  problem.tau = cfg.tau;
  problem.kappa = cfg.kappa;
  problem.z_ref = Design(cfg.z_ref);
  problem.z0 = Design(cfg.z0);
  problem.alpha = cfg.alpha;
  problem.eta = cfg.eta;
  problem.eps = cfg.eps;
  problem.max_iters = cfg.max_iters;
  problem.seed = cfg.seed;
  CmlmcOracle oracle(model, cfg.mlmc, cfg.seed);
  std::vector<OptState> seen;
  const AmgdResult res = run_amgd(problem, oracle, [&](const OptState& s) {
    json h = {{"j", s.j},
              {"z", s.z.values()},
              {"theta", s.theta},
              {"theta_interval", {s.interval.lo, s.interval.hi}},
              {"target_tol", s.target_tol},
              {"iteration_cost", s.iteration_cost}};
    if (s.hierarchy) h["hierarchy"] = to_json(*s.hierarchy);
    if (s.errors) h["errors"] = to_json(*s.errors);
    json rounds = json::array();
    for (const auto& r : oracle.last_rounds()) rounds.push_back(to_json(r));
    h["rounds"] = rounds;
    write_json(cfg.out_dir / ("hierarchy_" + std::to_string(s.j) + ".json"), h);

    std::vector<double> q = s.samples;
    std::sort(q.begin(), q.end());
    auto f = open_out(cfg.out_dir / ("cdf_" + std::to_string(s.j) + ".csv"));
    f << "q,cdf,var,cvar\n";
    for (std::size_t i = 0; i < q.size(); ++i)
      f << q[i] << ',' << static_cast<double>(i + 1) / q.size() << ',' << s.var << ',' << s.cvar
        << '\n';
    seen.push_back(s);
    write_history(cfg.out_dir / "history.csv", seen);
  });
  write_json(cfg.out_dir / "summary.json",
             {{"converged", res.converged},
              {"iterations", res.history.back().j},
              {"final_residual", res.history.back().residual},
              {"final_z", res.history.back().z.values()},
              {"initial_cvar", res.history.front().cvar},
              {"final_cvar", res.history.back().cvar}});
}

void run_reference(const ExperimentConfig& cfg, const Model& model) {
  const Reference ref = make_reference(model, Design(cfg.z0), cfg.tau, cfg.reference.samples,
                                       reference_level(cfg, model), cfg.reference.grid_points,
                                       cfg.seed);
  write_json(cfg.out_dir / "reference.json", to_json(ref));
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto model = make_model(cfg.model);
  if (cfg.kind == "estimate") return run_estimate(cfg, *model);
  if (cfg.kind == "reliability") return run_reliability(cfg, *model);
  if (cfg.kind == "complexity") return run_complexity(cfg, *model);
  if (cfg.kind == "optimize") return run_optimize(cfg, *model);
  if (cfg.kind == "reference") return run_reference(cfg, *model);
  throw ConfigError("experiment.kind", "unknown kind " + cfg.kind);
}

}  // namespace cvar_mlmc
