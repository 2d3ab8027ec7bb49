#include "cvar_mlmc/model.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/parallel.hpp"

namespace cvar_mlmc {

Design::Design(std::vector<double> z) : z_(std::move(z)) {
  if (z_.empty()) throw ParameterError("Design: dimension must be at least 1");
  for (double v : z_)
    if (!std::isfinite(v)) throw ParameterError("Design: entries must be finite");
}

void Model::check_request(const Design& z, int level) const {
  if (level < 0 || level > max_level())
    throw ParameterError(name() + ": level " + std::to_string(level) + " outside [0, " +
                         std::to_string(max_level()) + "]");
  if (z.dim() != dimension())
    throw ParameterError(name() + ": design has dimension " + std::to_string(z.dim()) +
                         ", expected " + std::to_string(dimension()));
}

LinearGaussianModel::LinearGaussianModel(double sigma, int max_level)
    : sigma_(sigma), max_level_(max_level) {
  if (!(sigma >= 0.0)) throw ParameterError("linear_gaussian: sigma must be non-negative");
  if (max_level < 1) throw ParameterError("linear_gaussian: max_level must be at least 1");
}

CorrelatedSample LinearGaussianModel::sample_pair(const Design& z, int level,
                                                  SeedStream& stream) const {
  check_request(z, level);
  const double q = z[0] + sigma_ * stream.next_normal();
  CorrelatedSample s;
  s.q_fine = q;
  s.grad_fine = {1.0};
  s.cost = level_cost(level);
  if (level > 0) {
    s.q_coarse = q;
    s.grad_coarse = std::vector<double>{1.0};
    s.cost += level_cost(level - 1);
  }
  return s;
}

double LinearGaussianModel::exact_var(double z, double tau) const {
  const boost::math::normal_distribution<double> n01;
  return z + sigma_ * boost::math::quantile(n01, tau);
}

double LinearGaussianModel::exact_cvar(double z, double tau) const {
  const boost::math::normal_distribution<double> n01;
  const double x = boost::math::quantile(n01, tau);
  return z + sigma_ * boost::math::pdf(n01, x) / (1.0 - tau);
}

double LinearGaussianModel::penalised_optimum(double z_ref, double kappa) {
  if (!(kappa > 0.0)) throw ParameterError("penalised_optimum: kappa must be positive");
  return z_ref - 1.0 / (2.0 * kappa);
}

std::vector<CouplingRow> coupling_report(const Model& model, const Design& z, int levels,
                                         int samples_per_level, std::uint64_t seed) {
  if (levels < 2) throw ParameterError("coupling_report: levels must be at least 2");
  if (samples_per_level < 2)
    throw ParameterError("coupling_report: samples_per_level must be at least 2");
  std::vector<CouplingRow> rows;
  for (int l = 1; l <= levels; ++l) {
    std::vector<double> diff(static_cast<std::size_t>(samples_per_level));
    std::vector<double> cost(diff.size());
    parallel_for(diff.size(), [&](std::size_t i) {
      SeedStream stream = derive_stream(seed, static_cast<std::uint64_t>(l), i, 0);
      const CorrelatedSample s = model.sample_pair(z, l, stream);
      diff[i] = s.q_fine - *s.q_coarse;
      cost[i] = s.cost;
    });
    CouplingRow row;
    row.level = l;
    for (std::size_t i = 0; i < diff.size(); ++i) {
      row.mean_diff += diff[i];
      row.mean_cost += cost[i];
    }
    const double n = static_cast<double>(diff.size());
    row.mean_diff /= n;
    row.mean_cost /= n;
    for (double d : diff) row.var_diff += (d - row.mean_diff) * (d - row.mean_diff);
    row.var_diff /= n - 1.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cvar_mlmc
