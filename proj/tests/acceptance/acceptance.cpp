// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs from the current directory and writes its
// experiment outputs under acceptance_out/.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvar_mlmc/config.hpp"
#include "cvar_mlmc/error_estimation.hpp"
#include "cvar_mlmc/estimator.hpp"
#include "cvar_mlmc/experiment.hpp"
#include "cvar_mlmc/fhn.hpp"
#include "cvar_mlmc/kde.hpp"
#include "cvar_mlmc/parallel.hpp"
#include "cvar_mlmc/pollutant.hpp"
#include "support.hpp"

using namespace cvar_mlmc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kOut = "acceptance_out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  std::getline(f, line);
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  }
  std::vector<Row> rows;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    Row r;
    std::string cell;
    for (const auto& c : cols) {
      std::getline(ss, cell, ',');
      r[c] = cell;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

double num(const Row& r, const std::string& key) { return std::stod(r.at(key)); }

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

// Least-squares slope of y on x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

ExperimentConfig config(const std::string& name, const std::string& out) {
  ExperimentConfig cfg = load_config(fs::path(CVAR_MLMC_CONFIGS) / name);
  cfg.out_dir = kOut / out;
  fs::remove_all(cfg.out_dir);
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  fhn::Params p;
  p.sigma = 0.0;
  const std::vector<double> z0{0.7, 0.8, 0.08, 1.0};
  const int level = 4;
  const std::vector<double> noise(2 * fhn::steps_at_level(p, level), 0.0);
  const Design z(z0);
  const auto fwd = fhn::simulate_forward(p, z, level, noise);
  const auto g = fhn::sensitivities(fwd.trajectory, fhn::solve_adjoint(fwd.trajectory, p, z), p, z);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    auto up = z0, dn = z0;
    up[k] += h;
    dn[k] -= h;
    const double fd = (fhn::simulate_forward(p, Design(up), level, noise).qoi -
                       fhn::simulate_forward(p, Design(dn), level, noise).qoi) /
                      (2 * h);
    worst = std::max(worst, std::abs(g[k] - fd) / std::abs(fd));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 1.0,
          fmt("max relative error %.2e (limit 1e-4), %.3f s", worst, secs)};
}

// Single-level estimate on n samples of `model`; also returns the standard
// error of the CVaR as the sample standard error of φ(θ*, Q).
struct SingleLevel {
  ParametricEstimates est;
  VarCvar vc;
  double cvar_se;
};

SingleLevel single_level(const Model& model, const ThetaGrid& grid, double tau, std::int64_t n,
                         std::uint64_t seed) {
  const Design z({0.0});
  auto r = estimate_pointwise(model, z, Hierarchy{0, {n}, grid.size(), 2}, grid, tau, seed, 0);
  auto est = build_functionals(std::move(r.pointwise), grid, z, tau, std::move(r.batches));
  const VarCvar vc = extract_var_cvar(est);
  double m = 0, m2 = 0;
  for (const auto& s : est.batches[0].samples) {
    const double phi = vc.var + std::max(s.q_fine - vc.var, 0.0) / (1 - tau);
    m += phi;
    m2 += phi * phi;
  }
  const double nn = static_cast<double>(n);
  m /= nn;
  const double var = (m2 / nn - m * m) * nn / (nn - 1);
  return {std::move(est), vc, std::sqrt(var / nn)};
}

Outcome parametric_expectations() {
  const auto t0 = Clock::now();
  const double tau = 0.7;
  const LinearGaussianModel lg(0.1);
  const auto a = single_level(lg, ThetaGrid(-0.2, 0.3, 65), tau, 10'000, 1);
  double worst_psi = 0.0;
  for (double t : {0.0, 0.03, 0.06, 0.09, 0.12}) {
    double ind = 0.0;
    for (const auto& s : a.est.batches[0].samples) ind += s.q_fine >= t ? s.grad_fine[0] : 0.0;
    ind /= a.est.batches[0].size() * (1 - tau);
    worst_psi = std::max(worst_psi, std::abs(a.est.psi_prime(0, t) - ind) / ind);
  }

  const testing::UniformModel uni;
  const auto u = single_level(uni, ThetaGrid(0.5, 0.95, 33), tau, 10'000, 2);
  const double u_dev = std::abs(u.vc.cvar - 0.85) / u.cvar_se;

  const LinearGaussianModel n01(1.0);
  const auto n = single_level(n01, ThetaGrid(-0.5, 1.5, 33), tau, 10'000, 3);
  const double n_dev = std::abs(n.vc.cvar - 1.1590) / n.cvar_se;

  const double secs = seconds_since(t0);
  return {worst_psi <= 0.02 && u_dev <= 3.0 && n_dev <= 3.0 && secs < 10.0,
          fmt("Psi' rel. error %.4f (limit 0.02); uniform CVaR %.4f = %.2f SE off; normal CVaR "
              "%.4f = %.2f SE off (limit 3); %.2f s",
              worst_psi, u.vc.cvar, u_dev, n.vc.cvar, n_dev, secs)};
}

Outcome mse_sum() {
  const std::vector<TargetError> t{{9, 0, 16}, {0, 0, 0}, {0.125, 1e-3, 2.5}, {1e-9, 3.0, 0.0}};
  double sum = 0.0;
  for (const auto& e : t) sum += e.interp_sq + e.bias_sq + e.stat_sq;
  const double got = total_gradient_mse(t);
  const bool simple = total_gradient_mse({{9, 0, 16}, {0, 0, 0}}) == 25.0;
  return {got == sum && simple, fmt("sum %.17g vs %.17g; (9,0,16)+(0,0,0) -> 25: %s", got, sum,
                                    simple ? "yes" : "no")};
}

Outcome kde_closed_form() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int points = 0;
  for (double theta : {-2.0, -0.5, 0.0, 0.7, 3.0})
    for (double mu : {-1.0, 0.0, 0.4, 1.3, 2.5})
      for (double delta : {0.01, 0.1, 0.5, 2.0}) {
        worst = std::max(worst, std::abs(kde::gaussian_partial_moment(theta, mu, delta) -
                                         testing::partial_moment_quadrature(theta, mu, delta)));
        ++points;
      }
  const double secs = seconds_since(t0);
  return {points == 100 && worst <= 1e-8 && secs < 1.0,
          fmt("%d lattice points, max abs error %.2e (limit 1e-8), %.3f s", points, worst, secs)};
}

Outcome reliability() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = config("fhn_reliability.json", "reliability");
  run_experiment(cfg);
  const auto rows = read_csv(cfg.out_dir / "reliability.csv");
  const json ref = read_json(cfg.out_dir / "reference.json");
  const auto model = make_model(cfg.model);
  const double ref_cost = ref["samples"].get<double>() * model->level_cost(ref["level"].get<int>());
  int covers_point = 0, within_sup = 0;
  double max_cost = 0.0;
  for (const auto& r : rows) {
    const double est = num(r, "estimated_rmse");
    covers_point += est >= num(r, "true_pointwise_error");
    within_sup += est <= 10.0 * num(r, "true_sup_error");
    max_cost = std::max(max_cost, num(r, "hierarchy_cost"));
  }
  const double budget = ref_cost / max_cost;
  const double secs = seconds_since(t0);
  const bool ok = rows.size() == 20 && covers_point >= 18 && within_sup >= 18 && budget >= 16.0 &&
                  secs <= 1800.0;
  return {ok, fmt("%zu runs at tol %.2g: RMSE >= pointwise error in %d, RMSE <= 10x sup error "
                  "in %d (need 18 each); reference budget %.1fx; %.0f s",
                  rows.size(), cfg.tolerances.front(), covers_point, within_sup, budget, secs)};
}

Outcome complexity() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = config("fhn_complexity.json", "complexity");
  run_experiment(cfg);
  const auto rows = read_csv(cfg.out_dir / "complexity.csv");
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(std::log(num(r, "tolerance")));
    y.push_back(std::log(num(r, "total_cost")));
  }
  const double s = slope(x, y);
  const double span = std::exp(*std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end()));
  std::vector<double> tol(x);
  std::sort(tol.begin(), tol.end());
  const auto distinct = std::unique(tol.begin(), tol.end()) - tol.begin();
  const double secs = seconds_since(t0);
  return {distinct >= 4 && span >= 10.0 - 1e-9 && s >= -2.6 && s <= -1.6 && secs <= 1800.0,
          fmt("%td tolerances spanning %.1fx, cost slope %.3f (range [-2.6, -1.6]), %.0f s",
              distinct, span, s, secs)};
}

Outcome optimisation_and_cost_law(Outcome& cost_law) {
  const auto t0 = Clock::now();
  // (a) linear-Gaussian benchmark.
  const ExperimentConfig lg = config("lg_optimize.json", "lg_optimize");
  run_experiment(lg);
  const auto lh = read_csv(lg.out_dir / "history.csv");
  const double z_star = LinearGaussianModel::penalised_optimum(lg.z_ref.at(0), lg.kappa);
  const double z_final = num(lh.back(), "z_1");
  const double tol_final = num(lh.back(), "target_tol");
  std::vector<double> j, lr;
  for (const auto& r : lh) {
    j.push_back(num(r, "j"));
    lr.push_back(std::log(num(r, "residual")));
  }
  const double res_slope = slope(j, lr);
  const bool lg_ok = read_json(lg.out_dir / "summary.json")["converged"].get<bool>() &&
                     std::abs(z_final - z_star) <= 3.0 * tol_final && res_slope < 0.0;

  // (b) FHN.
  const ExperimentConfig fc = config("fhn_optimize.json", "fhn_optimize");
  run_experiment(fc);
  const auto fh = read_csv(fc.out_dir / "history.csv");
  const json summary = read_json(fc.out_dir / "summary.json");
  const std::size_t last = fh.size() - 1;
  const double residual = num(fh[last], "residual");
  const double c0 = num(fh[0], "cvar"), c_end = num(fh[last], "cvar");
  bool monotone = true;
  for (std::size_t i = last / 2; i < last; ++i)
    monotone = monotone && num(fh[i + 1], "var") <= num(fh[i], "var") &&
               num(fh[i + 1], "cvar") <= num(fh[i], "cvar");
  // Empirical CDF shift: the final fine samples sit left of the initial ones
  // at the median.
  auto median_q = [](const fs::path& p) {
    const auto rows = read_csv(p);
    std::vector<double> q;
    for (const auto& r : rows) q.push_back(num(r, "q"));
    std::sort(q.begin(), q.end());
    return q[q.size() / 2];
  };
  const double med0 = median_q(fc.out_dir / "cdf_0.csv");
  const double med_end = median_q(fc.out_dir / ("cdf_" + std::to_string(last) + ".csv"));
  const bool fhn_ok = summary["converged"].get<bool>() && residual <= fc.eps && c_end < c0 &&
                      monotone && med_end < med0;

  // Criterion 8 on the same run: cumulative cost vs gradient norm over the
  // final half of the iterations.
  std::vector<double> lg_norm, lc;
  for (std::size_t i = last / 2 + (last % 2); i <= last; ++i) {
    lg_norm.push_back(std::log(num(fh[i], "gradient_norm")));
    lc.push_back(std::log(num(fh[i], "cumulative_cost")));
  }
  const double cs = lg_norm.size() >= 2 ? slope(lg_norm, lc) : NAN;
  cost_law = {cs >= -2.6 && cs <= -1.5,
              fmt("slope %.3f over %zu final iterates (range [-2.6, -1.5])", cs, lg_norm.size())};

  const double secs = seconds_since(t0);
  return {lg_ok && fhn_ok && secs <= 3600.0,
          fmt("LG: |z - z*| = %.2e vs 3x tol %.2e, log-residual slope %.3f; FHN: %zu iterations, "
              "residual %.4f, CVaR %.4f -> %.4f, last-half monotone %s, median Q %.4f -> %.4f; "
              "%.0f s",
              std::abs(z_final - z_star), 3.0 * tol_final, res_slope, last, residual, c0, c_end,
              monotone ? "yes" : "no", med0, med_end, secs)};
}

Outcome pollutant_desk_scale() {
  const auto t0 = Clock::now();
  const pollutant::PollutantModel model;
  const Design z0(std::vector<double>(9, 0.1));
  SeedStream stream(0, 0, 0, 0);
  const pollutant::Velocity omega = model.draw_velocity(stream);
  const auto [q, g] = model.evaluate(z0, omega, 0);
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t k = 0; k < 9; ++k) {
    auto up = z0.values(), dn = z0.values();
    up[k] += h;
    dn[k] -= h;
    const double fd =
        (model.evaluate(Design(up), omega, 0).first - model.evaluate(Design(dn), omega, 0).first) / (2 * h);
    worst = std::max(worst, std::abs(g[k] - fd) / std::abs(fd));
  }

  const ExperimentConfig cfg = config("pollutant_optimize.json", "pollutant_optimize");
  run_experiment(cfg);
  const auto hist = read_csv(cfg.out_dir / "history.csv");
  const json summary = read_json(cfg.out_dir / "summary.json");
  const double c0 = num(hist.front(), "cvar"), c_end = num(hist.back(), "cvar");
  const double secs = seconds_since(t0);
  const bool ok = worst <= 1e-3 && summary["converged"].get<bool>() &&
                  num(hist.back(), "residual") <= cfg.eps && hist.size() >= 2 && c_end < c0 &&
                  secs <= 1800.0;
  return {ok, fmt("adjoint vs FD max rel. error %.2e (limit 1e-3); %zu iterations to residual "
                  "%.3f, CVaR %.4f -> %.4f; %.0f s",
                  worst, hist.size() - 1, num(hist.back(), "residual"), c0, c_end, secs)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") {
      std::ifstream f(e.path(), std::ios::binary);
      std::stringstream s;
      s << f.rdbuf();
      out[e.path().filename().string()] = s.str();
    }
  return out;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  struct Case {
    std::string config;
    std::optional<double> tol;
  };
  const std::vector<Case> cases{{"fhn_estimate.json", 1.0}, {"lg_optimize.json", std::nullopt},
                                {"fhn_complexity.json", std::nullopt}};
  int compared = 0;
  std::string mismatch;
  const unsigned saved = thread_count();
  for (const auto& c : cases) {
    std::vector<std::map<std::string, std::string>> runs;
    for (unsigned threads : {1u, 8u, 1u}) {
      ExperimentConfig cfg = config(c.config, "determinism/" + c.config + "_" + std::to_string(runs.size()));
      if (c.tol) cfg.tolerances = {*c.tol};
      if (cfg.kind == "complexity") cfg.tolerances = {2.0, 1.0};
      set_thread_count(threads);
      run_experiment(cfg);
      runs.push_back(csv_files(cfg.out_dir));
    }
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r] != runs[0]) mismatch += c.config + " ";
    compared += static_cast<int>(runs[0].size());
  }
  set_thread_count(saved);
  const double secs = seconds_since(t0);
  return {mismatch.empty() && compared > 0,
          fmt("%d CSV files compared across 1/8/1 threads; %s; %.0f s", compared,
              mismatch.empty() ? "all bit-identical" : ("differences in " + mismatch).c_str(), secs)};
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "adjoint gradient vs finite differences", guarded(gradient_correctness));
  report(2, "parametric expectations", guarded(parametric_expectations));
  report(3, "total gradient MSE is the component sum", guarded(mse_sum));
  report(4, "KDE partial moment vs quadrature", guarded(kde_closed_form));
  report(5, "error estimate reliability", guarded(reliability));
  report(6, "cost vs tolerance", guarded(complexity));
  Outcome cost_law{false, "not run"};
  report(7, "optimisation convergence", guarded([&] { return optimisation_and_cost_law(cost_law); }));
  report(8, "cumulative cost law", cost_law);
  report(9, "pollutant desk scale", guarded(pollutant_desk_scale));
  report(10, "thread-count determinism", guarded(determinism));

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
