#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "doctest.h"

#include "cvar_mlmc/cmlmc.hpp"
#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/fhn.hpp"
#include "support.hpp"

using namespace cvar_mlmc;

namespace {

const Design kFhnZ({0.7, 0.8, 0.08, 1.0});

// Exact Φ′ and Ψ′ of Q = z + σξ at θ.
std::array<double, 2> lg_gradient(double z, double sigma, double tau, double theta) {
  const boost::math::normal n01;
  const double tail = boost::math::cdf(boost::math::complement(n01, (theta - z) / sigma));
  return {1.0 - tail / (1.0 - tau), tail / (1.0 - tau)};
}

}  // namespace

TEST_SUITE("cmlmc") {

TEST_CASE("sample allocation arithmetic") {
  CHECK(allocate_samples({4, 1}, {1, 4}, 1.0, 1.0) == std::vector<std::int64_t>{8, 2});
  CHECK(allocate_samples({0, 0}, {1, 4}, 1.0, 1.0) == std::vector<std::int64_t>{2, 2});
  // Halving ε_s quadruples N before the ceiling.
  const auto a = allocate_samples({3.0, 0.7, 0.1}, {1, 3, 6}, 0.01, 1.0);
  const auto b = allocate_samples({3.0, 0.7, 0.1}, {1, 3, 6}, 0.005, 1.0);
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(b[l] >= 4 * (a[l] - 1));
    CHECK(b[l] <= 4 * a[l]);
  }
  CHECK_THROWS_AS(allocate_samples({1.0}, {1.0, 2.0}, 1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(allocate_samples({1.0}, {0.0}, 1.0, 1.0), ParameterError);
}

TEST_CASE("grid rule") {
  CHECK(select_grid_size(17, 0.5, 0.5).n == 17);
  CHECK(select_grid_size(17, 0.0, 0.5).n == 17);
  CHECK(select_grid_size(17, 4.0, 0.5).n == 33);
  CHECK(select_grid_size(17, 4.01, 0.5).n == 65);
  const auto capped = select_grid_size(17, 1e9, 0.5, 129);
  CHECK(capped.n == 129);
  CHECK(capped.capped);
}

TEST_CASE("pair costs and hierarchy cost") {
  const fhn::FhnModel m;
  CHECK(pair_costs(m, 2) == std::vector<double>{20, 60, 120});
  CHECK(hierarchy_cost(m, Hierarchy{2, {10, 5, 2}, 17, 2}) == 10 * 20 + 5 * 60 + 2 * 120);
}

TEST_CASE("rate fit on synthetic decay") {
  ErrorBreakdown e;
  e.targets.resize(1);
  e.alpha = {1.0};
  e.level_bias = {{0, 0.5, 0.25, 0.125, 0.0625}};
  e.level_variance = {1.0, 0.25, 0.0625, 0.015625, 0.00390625};
  const auto r = fit_rates(e, {1, 2, 4, 8, 16}, 2);
  CHECK(r.alpha == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.beta == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.gamma == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pooled samples come from a well-populated level") {
  const LinearGaussianModel m(0.1, 4);
  const auto batches = simulate_batches(m, Design({0.0}), Hierarchy{3, {100, 40, 20, 4}, 17, 2}, 0, 0);
  const auto p = pooled_samples(batches, ErrorSettings{});
  REQUIRE(p.size() == 40);
  CHECK(p[0] == batches[1].samples[0].q_fine);
}

TEST_CASE("linear-Gaussian adaptation settles on one correction level") {
  const LinearGaussianModel m(0.1);
  const auto r = run_cmlmc(m, Design({0.0}), 0.05, CmlmcSettings{}, std::nullopt, {}, 1, 0);
  CHECK(r.converged);
  CHECK(r.hierarchy.max_level == 1);
  CHECK(r.errors.bias_sq() == 0.0);
  CHECK(std::sqrt(r.errors.total_mse_sq()) <= 0.05);
}

TEST_CASE("same seed gives the same result") {
  const LinearGaussianModel m(0.1);
  const auto a = run_cmlmc(m, Design({0.0}), 0.05, CmlmcSettings{}, std::nullopt, {}, 4, 0);
  const auto b = run_cmlmc(m, Design({0.0}), 0.05, CmlmcSettings{}, std::nullopt, {}, 4, 0);
  CHECK(a.hierarchy.samples == b.hierarchy.samples);
  CHECK(a.estimates.pointwise.phi == b.estimates.pointwise.phi);
  CHECK(a.errors.total_mse_sq() == b.errors.total_mse_sq());
}

TEST_CASE("linear-Gaussian reliability") {
  const LinearGaussianModel m(0.1);
  const double tau = 0.7;
  int reported_ok = 0, true_ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_cmlmc(m, Design({0.0}), 0.05, CmlmcSettings{}, std::nullopt, {}, seed, 0);
    const auto vc = extract_var_cvar(r.estimates);
    const auto g = lg_gradient(0.0, 0.1, tau, vc.var);
    const double e = std::hypot(r.estimates.phi_prime(vc.var) - g[0],
                                r.estimates.psi_prime(0, vc.var) - g[1]);
    reported_ok += std::sqrt(r.errors.total_mse_sq()) <= 0.05;
    true_ok += e <= 0.15;
  }
  CHECK(reported_ok >= 18);
  CHECK(true_ok >= 18);
}

TEST_CASE("FHN screening measures unit cost growth") {
  const fhn::FhnModel m;
  const auto s = screening(m, kFhnZ, CmlmcSettings{}.screen, CmlmcSettings{}, {}, 0, 0);
  CHECK(s.rates.gamma == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::isfinite(s.rates.alpha));
  CHECK(std::isfinite(s.rates.beta));
  CHECK(s.hierarchy.samples == std::vector<std::int64_t>{64, 32, 16});
  const auto again = screening(m, kFhnZ, CmlmcSettings{}.screen, CmlmcSettings{}, {}, 0, 0);
  CHECK(again.errors.total_mse_sq() == s.errors.total_mse_sq());
}

TEST_CASE("FHN rounds only add levels and the tolerance is met") {
  const fhn::FhnModel m;
  const auto r = run_cmlmc(m, kFhnZ, 1.0, CmlmcSettings{}, std::nullopt, {}, 1, 0);
  CHECK(r.converged);
  CHECK(r.errors.total_mse_sq() <= 1.0);
  for (std::size_t k = 2; k < r.rounds.size(); ++k)
    CHECK(r.rounds[k].hierarchy.max_level >= r.rounds[k - 1].hierarchy.max_level);
  CHECK(r.hierarchy_cost == hierarchy_cost(m, r.hierarchy));
}

TEST_CASE("FHN cost roughly quadruples when the tolerance halves") {
  const fhn::FhnModel m;
  const auto a = run_cmlmc(m, kFhnZ, 1.0, CmlmcSettings{}, std::nullopt, {}, 1, 0);
  const auto b = run_cmlmc(m, kFhnZ, 0.5, CmlmcSettings{}, std::nullopt, {}, 1, 0);
  const double ratio = b.hierarchy_cost / a.hierarchy_cost;
  CHECK(ratio >= 2.5);
  CHECK(ratio <= 6.0);
}

TEST_CASE("constant model stops at the first check") {
  const testing::ConstantModel m(0.5, 4);
  CmlmcSettings s;
  const auto r = run_cmlmc(m, Design({0.0}), 0.05, s, std::nullopt, {}, 0, 0);
  CHECK(r.rounds.size() == 1);
  CHECK(r.errors.bias_sq() == 0.0);
  CHECK(r.errors.stat_sq() == 0.0);
  CHECK(r.errors.total_mse_sq() == r.errors.interp_sq());
}

TEST_CASE("unreachable tolerance raises a convergence error") {
  const fhn::FhnModel m;
  CmlmcSettings s;
  s.max_rounds = 1;
  CHECK_THROWS_AS(run_cmlmc(m, kFhnZ, 1e-4, s, std::nullopt, {}, 0, 0), ConvergenceError);
  CHECK_THROWS_AS(run_cmlmc(m, kFhnZ, 0.0, s, std::nullopt, {}, 0, 0), ParameterError);
}

}
