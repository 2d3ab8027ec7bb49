#include "cvar_mlmc/kde.hpp"

#include <cmath>
#include <numbers>

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/kernels.hpp"

namespace cvar_mlmc::kde {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/√(2π)

void check_samples(std::size_t n) {
  if (n < 2) throw InsufficientSamplesError("kde: need at least 2 samples");
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("kde: tau must lie in (0, 1)");
}

}  // namespace

double gaussian_partial_moment(double theta, double mu, double delta) {
  if (!(delta > 0.0)) throw ParameterError("kde: bandwidth must be positive");
  const double d = mu - theta;
  const double u = d / delta;
  // Far tails: the kernel mass is entirely on one side of θ.
  if (u > 40.0) return d;
  if (u < -40.0) return 0.0;
  const double cdf = 0.5 * std::erfc(-u / std::numbers::sqrt2);
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  return d * cdf + delta * pdf;
}

double scott_bandwidth(std::span<const double> samples) {
  check_samples(samples.size());
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double q : samples) mean += q;
  mean /= n;
  double ss = 0.0;
  for (double q : samples) ss += (q - mean) * (q - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return std::max(sd * std::pow(n, -0.2), 1e-12);
}

std::vector<std::vector<double>> weighted_moment_sums(std::span<const double> theta,
                                                      std::span<const double> q,
                                                      const std::vector<std::vector<double>>& g,
                                                      double delta) {
  for (const auto& w : g)
    if (w.size() != q.size()) throw ParameterError("kde: weight/sample size mismatch");
  std::vector<std::vector<double>> out(g.size(), std::vector<double>(theta.size(), 0.0));
  for (std::size_t r = 0; r < theta.size(); ++r) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double m = gaussian_partial_moment(theta[r], q[i], delta);
      if (m == 0.0) continue;
      for (std::size_t t = 0; t < g.size(); ++t) out[t][r] += g[t][i] * m;
    }
  }
  return out;
}

std::vector<double> kde_phi(std::span<const double> theta, std::span<const double> q,
                            double delta, double tau) {
  check_samples(q.size());
  check_tau(tau);
  const double scale = 1.0 / (static_cast<double>(q.size()) * (1.0 - tau));
  std::vector<double> out(theta.size());
  for (std::size_t r = 0; r < theta.size(); ++r) {
    double s = 0.0;
    for (double qi : q) s += gaussian_partial_moment(theta[r], qi, delta);
    out[r] = theta[r] + s * scale;
  }
  return out;
}

std::vector<double> kde_psi(std::span<const double> theta, std::span<const double> q,
                            std::span<const double> g, double delta, double tau) {
  check_samples(q.size());
  check_tau(tau);
  if (g.size() != q.size()) throw ParameterError("kde: sensitivity/sample size mismatch");
  const double scale = 1.0 / (static_cast<double>(q.size()) * (1.0 - tau));
  std::vector<double> out(theta.size());
  for (std::size_t r = 0; r < theta.size(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      s += g[i] * gaussian_partial_moment(theta[r], q[i], delta);
    out[r] = -s * scale;
  }
  return out;
}

std::vector<double> kde_level_difference(std::span<const double> theta,
                                         std::span<const double> q_fine,
                                         std::span<const double> g_fine,
                                         std::span<const double> q_coarse,
                                         std::span<const double> g_coarse, double delta_fine,
                                         double delta_coarse, double tau) {
  check_samples(q_fine.size());
  check_tau(tau);
  const std::size_t n = q_fine.size();
  if (g_fine.size() != n || q_coarse.size() != n || g_coarse.size() != n)
    throw ParameterError("kde: paired sample size mismatch");
  const double scale = 1.0 / (static_cast<double>(n) * (1.0 - tau));
  std::vector<double> out(theta.size());
  for (std::size_t r = 0; r < theta.size(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += g_coarse[i] * gaussian_partial_moment(theta[r], q_coarse[i], delta_coarse) -
           g_fine[i] * gaussian_partial_moment(theta[r], q_fine[i], delta_fine);
    out[r] = s * scale;
  }
  return out;
}

double fourth_derivative_sup_norm(std::span<const double> values, double h) {
  if (values.size() < 9) throw ParameterError("kde: fourth difference needs at least 9 points");
  if (!(h > 0.0)) throw ParameterError("kde: spacing must be positive");
  return kernels::fourth_difference_sup(values, h);
}

}  // namespace cvar_mlmc::kde
