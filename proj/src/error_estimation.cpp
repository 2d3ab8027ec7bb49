#include "cvar_mlmc/error_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/kde.hpp"
#include "cvar_mlmc/parallel.hpp"

namespace cvar_mlmc {

double total_gradient_mse(const std::vector<TargetError>& targets) {
  double s = 0.0;
  for (const auto& t : targets) s += t.interp_sq + t.bias_sq + t.stat_sq;
  return s;
}

double ErrorBreakdown::interp_sq() const {
  double s = 0.0;
  for (const auto& t : targets) s += t.interp_sq;
  return s;
}
double ErrorBreakdown::bias_sq() const {
  double s = 0.0;
  for (const auto& t : targets) s += t.bias_sq;
  return s;
}
double ErrorBreakdown::stat_sq() const {
  double s = 0.0;
  for (const auto& t : targets) s += t.stat_sq;
  return s;
}

namespace {

std::size_t target_count(const std::vector<LevelBatch>& batches) {
  if (batches.empty() || batches[0].samples.empty())
    throw InsufficientSamplesError("error estimation: no samples");
  return batches[0].samples[0].grad_fine.size() + 1;
}

// Target weights in ψ form: Φ behaves like ψ with Q_z ≡ -1 (plus θ, which
// is linear and drops out of every error component).
double weight_fine(const CorrelatedSample& s, std::size_t t) {
  return t == 0 ? -1.0 : s.grad_fine[t - 1];
}
double weight_coarse(const CorrelatedSample& s, std::size_t t) {
  return t == 0 ? -1.0 : (*s.grad_coarse)[t - 1];
}

struct Columns {
  std::vector<double> qf, gf, qc, gc;
};

Columns columns(const LevelBatch& b, std::size_t t, std::size_t limit) {
  const std::size_t n = std::min(b.samples.size(), limit);
  Columns c;
  c.qf.resize(n);
  c.gf.resize(n);
  if (b.level > 0) {
    c.qc.resize(n);
    c.gc.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = b.samples[i];
    c.qf[i] = s.q_fine;
    c.gf[i] = weight_fine(s, t);
    if (b.level > 0) {
      c.qc[i] = *s.q_coarse;
      c.gc[i] = weight_coarse(s, t);
    }
  }
  return c;
}

double derivative_sup(const ThetaGrid& grid, const ThetaGrid& probe,
                      std::span<const double> values) {
  return Spline::fit(grid, values).sup_norm(probe, 1);
}

}  // namespace

int choose_kde_level(const std::vector<LevelBatch>& batches, const ErrorSettings& settings) {
  if (batches.empty()) throw InsufficientSamplesError("error estimation: no levels");
  const int top = static_cast<int>(batches.size()) - 1;
  int level = settings.kde_level ? std::min(*settings.kde_level, top) : (top + 1) / 2;
  if (level < 0) throw ParameterError("error estimation: kde level must be non-negative");
  while (level > 0 && static_cast<std::int64_t>(batches[level].size()) < settings.kde_min_samples)
    --level;
  return level;
}

double interp_error(const std::vector<LevelBatch>& batches, const ThetaGrid& grid, double tau,
                    std::size_t target, const ErrorSettings& settings) {
  if (target >= target_count(batches)) throw ParameterError("error estimation: bad target");
  const int level = choose_kde_level(batches, settings);
  const LevelBatch& b = batches[level];
  if (b.size() < 2) throw InsufficientSamplesError("interp error: KDE level has < 2 samples");
  const Columns c = columns(b, target, static_cast<std::size_t>(settings.kde_max_samples));
  // A point mass has no density to smooth; its kink would only measure the
  // probe spacing.
  if (std::all_of(c.qf.begin(), c.qf.end(), [&](double q) { return q == c.qf.front(); }))
    return 0.0;
  const double delta = kde::scott_bandwidth(c.qf);
  const ThetaGrid probe = grid.dense();
  const std::vector<double> f = kde::kde_psi(probe.points(), c.qf, c.gf, delta, tau);
  const double d4 = kde::fourth_derivative_sup_norm(f, probe.spacing());
  const double h = grid.spacing();
  return settings.spline_constant * d4 * h * h * h;
}

BiasEstimate bias_error(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                        double tau, std::size_t target, int refinement,
                        const ErrorSettings& settings) {
  if (target >= target_count(batches)) throw ParameterError("error estimation: bad target");
  const int top = static_cast<int>(batches.size()) - 1;
  if (top < 1) throw ParameterError("bias error needs at least two levels");
  if (refinement < 2) throw ParameterError("bias error: refinement factor must be at least 2");

  std::vector<double> sup(static_cast<std::size_t>(top) + 1, 0.0);
  const int first = std::max(1, top - settings.regression_levels + 1);
  const std::vector<double> theta = grid.points();
  const ThetaGrid probe = grid.dense();
  for (int l = first; l <= top; ++l) {
    const LevelBatch& b = batches[l];
    if (b.size() < 2) throw InsufficientSamplesError("bias error: level has < 2 samples");
    const Columns c = columns(b, target, static_cast<std::size_t>(settings.kde_max_samples));
    const double df = kde::scott_bandwidth(c.qf);
    const double dc = kde::scott_bandwidth(c.qc);
    const auto diff = kde::kde_level_difference(theta, c.qf, c.gf, c.qc, c.gc, df, dc, tau);
    sup[l] = derivative_sup(grid, probe, diff);
  }
  return extrapolate_bias(std::move(sup), first, refinement, settings.prior_alpha);
}

BiasEstimate extrapolate_bias(std::vector<double> level_sup, int first, int refinement,
                              double prior_alpha) {
  const int top = static_cast<int>(level_sup.size()) - 1;
  if (top < 1 || first < 1 || first > top)
    throw ParameterError("bias extrapolation: bad level range");
  BiasEstimate out;
  out.level_sup = std::move(level_sup);
  out.alpha = prior_alpha;
  const double d_top = out.level_sup[top];
  if (d_top == 0.0) return out;
  // Least squares of log D_l against l over the levels with D_l > 0.
  std::vector<double> xs, ys;
  for (int l = first; l <= top; ++l)
    if (out.level_sup[l] > 0.0) {
      xs.push_back(l);
      ys.push_back(std::log(out.level_sup[l]));
    }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    out.alpha = -(sxy / sxx) / std::log(static_cast<double>(refinement));
  }
  if (out.alpha <= 0.0) {
    out.fallback = true;
    out.value = d_top;
  } else {
    out.value = d_top / (std::pow(static_cast<double>(refinement), out.alpha) - 1.0);
  }
  return out;
}

namespace {

// Σ_i c_i g_i (q_i - θ_r)⁺ for ascending θ, using samples sorted by q.
void partial_sums(std::span<const double> theta, std::span<const std::size_t> order,
                  std::span<const double> q, std::span<const double> g,
                  std::span<const std::uint32_t> counts, std::span<double> out) {
  double sum_gq = 0.0, sum_g = 0.0;
  for (std::size_t i : order) {
    const double w = counts.empty() ? 1.0 : counts[i];
    sum_gq += w * g[i] * q[i];
    sum_g += w * g[i];
  }
  std::size_t p = 0;  // first sample (in ascending order) still above θ
  for (std::size_t r = 0; r < theta.size(); ++r) {
    while (p < order.size() && q[order[p]] <= theta[r]) {
      const std::size_t i = order[p++];
      const double w = counts.empty() ? 1.0 : counts[i];
      sum_gq -= w * g[i] * q[i];
      sum_g -= w * g[i];
    }
    out[r] = sum_gq - theta[r] * sum_g;
  }
}

struct LevelData {
  std::vector<std::size_t> order_f, order_c;
  std::vector<Columns> by_target;
  std::vector<std::vector<double>> original;  // per target, level contribution
};

std::vector<std::size_t> argsort(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

// Level-l contribution to the pointwise target (ψ form) under multiplicities.
void level_contribution(const LevelData& ld, int level, std::size_t t,
                        std::span<const double> theta, std::span<const std::uint32_t> counts,
                        double scale, std::vector<double>& tmp, std::span<double> out) {
  const Columns& c = ld.by_target[t];
  partial_sums(theta, ld.order_f, c.qf, c.gf, counts, out);
  if (level > 0) {
    partial_sums(theta, ld.order_c, c.qc, c.gc, counts, tmp);
    for (std::size_t r = 0; r < theta.size(); ++r) out[r] -= tmp[r];
  }
  for (std::size_t r = 0; r < theta.size(); ++r) out[r] *= -scale;
}

}  // namespace

StatEstimate stat_error_bootstrap(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                                  double tau, int replicas, std::uint64_t seed,
                                  std::uint64_t tag) {
  if (replicas < 2) throw ParameterError("bootstrap needs at least 2 replicas");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0, 1)");
  const std::size_t nt = target_count(batches);
  const std::size_t nl = batches.size();
  const std::vector<double> theta = grid.points();
  const std::size_t n = theta.size();
  const ThetaGrid probe = grid.dense();

  std::vector<LevelData> data(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const LevelBatch& b = batches[l];
    if (b.size() < 2) throw InsufficientSamplesError("bootstrap: every level needs >= 2 samples");
    LevelData& ld = data[l];
    for (std::size_t t = 0; t < nt; ++t) ld.by_target.push_back(columns(b, t, b.size()));
    ld.order_f = argsort(ld.by_target[0].qf);
    if (b.level > 0) ld.order_c = argsort(ld.by_target[0].qc);
    const double scale = 1.0 / (static_cast<double>(b.size()) * (1.0 - tau));
    std::vector<double> tmp(n);
    ld.original.assign(nt, std::vector<double>(n));
    for (std::size_t t = 0; t < nt; ++t)
      level_contribution(ld, b.level, t, theta, {}, scale, tmp, ld.original[t]);
  }

  // sup_total[b][t] and sup_level[b][l][t] of the spline-derivative deviation.
  std::vector<std::vector<double>> sup_total(replicas, std::vector<double>(nt));
  std::vector<std::vector<std::vector<double>>> sup_level(
      replicas, std::vector<std::vector<double>>(nl, std::vector<double>(nt)));

  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    std::vector<std::vector<double>> total(nt, std::vector<double>(n, 0.0));
    std::vector<double> dev(n), tmp(n);
    for (std::size_t l = 0; l < nl; ++l) {
      const LevelBatch& b = batches[l];
      const std::size_t nsamp = b.size();
      std::vector<std::uint32_t> counts(nsamp, 0);
      SeedStream stream(seed, l, rep, tag);
      for (std::size_t i = 0; i < nsamp; ++i) ++counts[stream.next_below(nsamp)];
      const double scale = 1.0 / (static_cast<double>(nsamp) * (1.0 - tau));
      for (std::size_t t = 0; t < nt; ++t) {
        level_contribution(data[l], b.level, t, theta, counts, scale, tmp, dev);
        for (std::size_t r = 0; r < n; ++r) {
          dev[r] -= data[l].original[t][r];
          total[t][r] += dev[r];
        }
        sup_level[rep][l][t] = derivative_sup(grid, probe, dev);
      }
    }
    for (std::size_t t = 0; t < nt; ++t) sup_total[rep][t] = derivative_sup(grid, probe, total[t]);
  });

  StatEstimate out;
  out.stat_sq.assign(nt, 0.0);
  out.level_variance.assign(nl, 0.0);
  for (int rep = 0; rep < replicas; ++rep) {
    for (std::size_t t = 0; t < nt; ++t) {
      out.stat_sq[t] += sup_total[rep][t] * sup_total[rep][t];
      for (std::size_t l = 0; l < nl; ++l)
        out.level_variance[l] += sup_level[rep][l][t] * sup_level[rep][l][t];
    }
  }
  for (auto& v : out.stat_sq) v /= replicas;
  for (std::size_t l = 0; l < nl; ++l)
    out.level_variance[l] *= static_cast<double>(batches[l].size()) / replicas;
  return out;
}

ErrorBreakdown estimate_errors(const std::vector<LevelBatch>& batches, const ThetaGrid& grid,
                               double tau, int refinement, const ErrorSettings& settings,
                               std::uint64_t seed, std::uint64_t tag) {
  const std::size_t nt = target_count(batches);
  ErrorBreakdown out;
  out.targets.resize(nt);
  out.alpha.assign(nt, settings.prior_alpha);
  out.level_bias.assign(nt, std::vector<double>(batches.size(), 0.0));
  out.kde_level = choose_kde_level(batches, settings);

  for (std::size_t t = 0; t < nt; ++t) {
    const double ei = interp_error(batches, grid, tau, t, settings);
    out.targets[t].interp_sq = ei * ei;
    if (batches.size() > 1) {
      const BiasEstimate be = bias_error(batches, grid, tau, t, refinement, settings);
      out.targets[t].bias_sq = be.value * be.value;
      out.alpha[t] = be.alpha;
      out.level_bias[t] = be.level_sup;
      out.bias_rate_fallback = out.bias_rate_fallback || be.fallback;
    }
  }
  const StatEstimate se =
      stat_error_bootstrap(batches, grid, tau, settings.bootstrap_replicas, seed, tag);
  for (std::size_t t = 0; t < nt; ++t) out.targets[t].stat_sq = se.stat_sq[t];
  out.level_variance = se.level_variance;
  return out;
}

}  // namespace cvar_mlmc
