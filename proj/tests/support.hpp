#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cvar_mlmc/model.hpp"
#include "cvar_mlmc/rng.hpp"

namespace cvar_mlmc::testing {

// Q ≡ c at every level, gradient ≡ 1.
class ConstantModel final : public Model {
 public:
  explicit ConstantModel(double c, int max_level = 4) : c_(c), max_level_(max_level) {}
  std::string name() const override { return "constant"; }
  std::size_t dimension() const override { return 1; }
  int max_level() const override { return max_level_; }
  double level_cost(int level) const override { return std::ldexp(1.0, level); }
  CorrelatedSample sample_pair(const Design& z, int level, SeedStream&) const override {
    check_request(z, level);
    CorrelatedSample s;
    s.q_fine = c_;
    s.grad_fine = {1.0};
    s.cost = level_cost(level);
    if (level > 0) {
      s.q_coarse = c_;
      s.grad_coarse = std::vector<double>{1.0};
      s.cost += level_cost(level - 1);
    }
    return s;
  }

 private:
  double c_;
  int max_level_;
};

// Single-level model Q = U(0, 1); gradient ≡ 1.
class UniformModel final : public Model {
 public:
  std::string name() const override { return "uniform"; }
  std::size_t dimension() const override { return 1; }
  int max_level() const override { return 0; }
  double level_cost(int) const override { return 1.0; }
  CorrelatedSample sample_pair(const Design& z, int level, SeedStream& stream) const override {
    check_request(z, level);
    CorrelatedSample s;
    s.q_fine = stream.next_open01();
    s.grad_fine = {1.0};
    s.cost = 1.0;
    return s;
  }
};

// ∫ (q - θ)⁺ N(q; μ, δ²) dq by adaptive Gauss–Kronrod in u = (q - θ)/δ,
// cut where the Gaussian tail falls below 1e-40.
inline double partial_moment_quadrature(double theta, double mu, double delta) {
  const double d = (mu - theta) / delta;
  const double lo = std::max(0.0, d - 14.0), hi = std::max(0.0, d + 14.0);
  if (hi <= lo) return 0.0;
  auto f = [d](double u) { return u * std::exp(-0.5 * (u - d) * (u - d)) / std::sqrt(2.0 * M_PI); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  return delta * GK::integrate(f, lo, hi, 20, 1e-14);
}

}  // namespace cvar_mlmc::testing
