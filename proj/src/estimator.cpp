#include "cvar_mlmc/estimator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/kernels.hpp"
#include "cvar_mlmc/parallel.hpp"

namespace cvar_mlmc {

void Hierarchy::validate() const {
  if (max_level < 0) throw ParameterError("hierarchy: L must be non-negative");
  if (samples.size() != static_cast<std::size_t>(max_level) + 1)
    throw ParameterError("hierarchy: need one sample count per level");
  for (auto n : samples)
    if (n < 2) throw ParameterError("hierarchy: every N_l must be at least 2");
  if (grid_size < 4) throw ParameterError("hierarchy: grid size must be at least 4");
  if (refinement < 2) throw ParameterError("hierarchy: refinement factor must be at least 2");
}

namespace {

CorrelatedSample checked_sample(const Model& model, const Design& z, int level,
                                std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  SeedStream stream(seed, static_cast<std::uint64_t>(level), index, tag);
  CorrelatedSample s;
  try {
    s = model.sample_pair(z, level, stream);
  } catch (const SolverError& e) {
    throw SampleError(e.what(), level, seed, index, tag);
  }
  bool finite = std::isfinite(s.q_fine);
  for (double g : s.grad_fine) finite = finite && std::isfinite(g);
  if (s.q_coarse) finite = finite && std::isfinite(*s.q_coarse);
  if (s.grad_coarse)
    for (double g : *s.grad_coarse) finite = finite && std::isfinite(g);
  if (!finite) throw SampleError("non-finite model output", level, seed, index, tag);
  return s;
}

}  // namespace

void extend_batches(const Model& model, const Design& z, const Hierarchy& h,
                    std::uint64_t seed, std::uint64_t tag, std::vector<LevelBatch>& batches) {
  h.validate();
  if (h.max_level > model.max_level())
    throw ParameterError("hierarchy: L exceeds the model's max level");
  if (z.dim() != model.dimension()) throw ParameterError("design dimension mismatch");
  if (batches.size() > static_cast<std::size_t>(h.levels()))
    throw ParameterError("hierarchy: cannot drop levels from existing batches");
  batches.resize(static_cast<std::size_t>(h.levels()));

  // Flatten the missing (level, index) pairs so one parallel loop covers all.
  struct Job {
    int level;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (int l = 0; l <= h.max_level; ++l) {
    LevelBatch& b = batches[l];
    b.level = l;
    const auto want = static_cast<std::size_t>(h.samples[l]);
    for (std::size_t i = b.samples.size(); i < want; ++i) jobs.push_back({l, i});
    if (b.samples.size() < want) b.samples.resize(want);
  }
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    batches[job.level].samples[job.index] =
        checked_sample(model, z, job.level, seed, job.index, tag);
  });
  for (auto& b : batches) {
    b.total_cost = 0.0;
    for (const auto& s : b.samples) b.total_cost += s.cost;
  }
}

std::vector<LevelBatch> simulate_batches(const Model& model, const Design& z,
                                         const Hierarchy& h, std::uint64_t seed,
                                         std::uint64_t tag) {
  std::vector<LevelBatch> batches;
  extend_batches(model, z, h, seed, tag, batches);
  return batches;
}

PhiPsiPointwise pointwise_from_batches(const std::vector<LevelBatch>& batches,
                                       const ThetaGrid& grid, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  if (batches.empty() || batches[0].samples.empty())
    throw InsufficientSamplesError("estimator: no samples");
  const std::size_t d = batches[0].samples[0].grad_fine.size();
  const std::vector<double> theta = grid.points();
  const std::size_t n = theta.size();
  const double denom = 1.0 - tau;

  PhiPsiPointwise out;
  out.phi.assign(n, 0.0);
  out.psi.assign(d, std::vector<double>(n, 0.0));
  std::vector<double> acc(n);
  for (const LevelBatch& b : batches) {
    if (b.samples.empty()) throw InsufficientSamplesError("estimator: empty level");
    const double inv_n = 1.0 / static_cast<double>(b.samples.size());
    const bool coupled = b.level > 0;

    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& s : b.samples)
      kernels::accumulate_phi(theta, 1.0, s.q_fine, coupled, coupled ? *s.q_coarse : 0.0, denom,
                              acc);
    for (std::size_t r = 0; r < n; ++r) out.phi[r] += acc[r] * inv_n;

    for (std::size_t k = 0; k < d; ++k) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& s : b.samples) {
        if (s.grad_fine.size() != d) throw ParameterError("estimator: ragged sensitivities");
        kernels::accumulate_psi(theta, 1.0, s.q_fine, s.grad_fine[k], coupled,
                                coupled ? *s.q_coarse : 0.0,
                                coupled ? (*s.grad_coarse)[k] : 0.0, denom, acc);
      }
      for (std::size_t r = 0; r < n; ++r) out.psi[k][r] += acc[r] * inv_n;
    }
  }
  return out;
}

PointwiseResult estimate_pointwise(const Model& model, const Design& z, const Hierarchy& h,
                                   const ThetaGrid& grid, double tau, std::uint64_t seed,
                                   std::uint64_t tag) {
  PointwiseResult r;
  r.batches = simulate_batches(model, z, h, seed, tag);
  r.pointwise = pointwise_from_batches(r.batches, grid, tau);
  return r;
}

double batches_cost(const std::vector<LevelBatch>& batches) {
  double c = 0.0;
  for (const auto& b : batches) c += b.total_cost;
  return c;
}

ParametricEstimates build_functionals(PhiPsiPointwise pointwise, const ThetaGrid& grid,
                                      const Design& z, double tau,
                                      std::vector<LevelBatch> batches) {
  Spline phi = Spline::fit(grid, pointwise.phi);
  std::vector<Spline> psi;
  psi.reserve(pointwise.psi.size());
  for (const auto& v : pointwise.psi) psi.push_back(Spline::fit(grid, v));
  const double cost = batches_cost(batches);
  return ParametricEstimates{grid,           z,          tau,  std::move(pointwise),
                             std::move(phi), std::move(psi), std::move(batches), cost};
}

VarCvar extract_var_cvar(const ParametricEstimates& est, double lo, double hi) {
  const SplineMinimum m = argmin_on_interval(est.phi, lo, hi);
  VarCvar out;
  out.var = m.theta;
  out.cvar = m.value;
  out.on_boundary = m.theta <= lo || m.theta >= hi;
  return out;
}

void write_estimates_csv(const std::filesystem::path& path, const ParametricEstimates& est,
                         const ThetaGrid& probe) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "theta,phi,phi_prime";
  for (std::size_t k = 0; k < est.dimension(); ++k) f << ",psi_prime_" << k + 1;
  f << '\n' << std::setprecision(17);
  for (int r = 0; r < probe.size(); ++r) {
    const double th = probe.point(r);
    f << th << ',' << est.phi.eval(th) << ',' << est.phi_prime(th);
    for (std::size_t k = 0; k < est.dimension(); ++k) f << ',' << est.psi_prime(k, th);
    f << '\n';
  }
}

}  // namespace cvar_mlmc
