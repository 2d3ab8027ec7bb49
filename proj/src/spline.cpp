#include "cvar_mlmc/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {

ThetaGrid::ThetaGrid(double lo, double hi, int n) : lo_(lo), hi_(hi), n_(n) {
  if (n < 4) throw ParameterError("theta grid needs at least 4 points");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw ParameterError("theta grid needs finite lo < hi");
}

double ThetaGrid::point(int r) const {
  if (r == n_ - 1) return hi_;
  return lo_ + r * spacing();
}

std::vector<double> ThetaGrid::points() const {
  std::vector<double> p(static_cast<std::size_t>(n_));
  for (int r = 0; r < n_; ++r) p[r] = point(r);
  return p;
}

ThetaGrid ThetaGrid::dense() const { return {lo_, hi_, std::max(10 * n_, 1000)}; }

bool ThetaGrid::contains(double theta) const { return theta >= lo_ && theta <= hi_; }

Spline Spline::fit(const ThetaGrid& grid, std::span<const double> y) {
  const int n = grid.size();
  if (y.size() != static_cast<std::size_t>(n))
    throw ParameterError("spline: expected " + std::to_string(n) + " values");
  for (double v : y)
    if (!std::isfinite(v)) throw ParameterError("spline: non-finite value");
  const double h = grid.spacing();

  // Second derivatives. Not-a-knot on a uniform grid pins M_1 and M_{n-2}
  // to the local second differences; the rest is a tridiagonal solve.
  std::vector<double> m(static_cast<std::size_t>(n), 0.0);
  auto d2 = [&](int i) { return (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h); };
  m[1] = d2(1);
  m[n - 2] = d2(n - 2);
  const int inner = n - 4;  // unknowns M_2 .. M_{n-3}
  if (inner > 0) {
    std::vector<double> diag(inner, 4.0), rhs(inner);
    for (int k = 0; k < inner; ++k) rhs[k] = 6.0 * d2(k + 2);
    rhs[0] -= m[1];
    rhs[inner - 1] -= m[n - 2];
    // Thomas algorithm with unit off-diagonals.
    for (int k = 1; k < inner; ++k) {
      const double w = 1.0 / diag[k - 1];
      diag[k] -= w;
      rhs[k] -= w * rhs[k - 1];
    }
    m[inner + 1] = rhs[inner - 1] / diag[inner - 1];
    for (int k = inner - 2; k >= 0; --k) m[k + 2] = (rhs[k] - m[k + 3]) / diag[k];
  }
  m[0] = 2.0 * m[1] - m[2];
  m[n - 1] = 2.0 * m[n - 2] - m[n - 3];

  Spline s(grid);
  s.coeffs_.resize(static_cast<std::size_t>(n - 1));
  for (int i = 0; i + 1 < n; ++i) {
    const double slope = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
    s.coeffs_[i] = {y[i], slope, m[i] / 2.0, (m[i + 1] - m[i]) / (6.0 * h)};
  }
  s.last_value_ = y[n - 1];
  return s;
}

double Spline::eval(double theta, int order) const {
  if (order < 0 || order > 3) throw ParameterError("spline: derivative order must be 0..3");
  if (!grid_.contains(theta)) {
    // Probe grids built from the same endpoints can land an ulp outside.
    const double slack = 1e-12 * (grid_.hi() - grid_.lo());
    if (theta < grid_.lo() - slack || theta > grid_.hi() + slack || std::isnan(theta))
      throw DomainError("spline: theta " + std::to_string(theta) + " outside [" +
                        std::to_string(grid_.lo()) + ", " + std::to_string(grid_.hi()) + "]");
    theta = std::clamp(theta, grid_.lo(), grid_.hi());
  }
  const double h = grid_.spacing();
  const int last = grid_.size() - 2;
  int i = std::clamp(static_cast<int>((theta - grid_.lo()) / h), 0, last);
  // The division can round across a knot.
  if (i > 0 && theta < grid_.point(i)) --i;
  else if (i < last && theta >= grid_.point(i + 1)) ++i;
  const double t = theta - grid_.point(i);
  // The final knot is the right end of the last piece, not a piece start.
  if (order == 0 && i == last && theta == grid_.hi()) return last_value_;
  const auto& c = coeffs_[i];
  switch (order) {
    case 0: return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
    case 1: return c[1] + t * (2.0 * c[2] + t * 3.0 * c[3]);
    case 2: return 2.0 * c[2] + 6.0 * c[3] * t;
    default: return 6.0 * c[3];
  }
}

std::vector<double> Spline::eval(std::span<const double> thetas, int order) const {
  std::vector<double> out(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) out[i] = eval(thetas[i], order);
  return out;
}

double Spline::sup_norm(const ThetaGrid& probe, int order) const {
  double best = 0.0;
  for (int r = 0; r < probe.size(); ++r) best = std::max(best, std::fabs(eval(probe.point(r), order)));
  return best;
}

SplineMinimum argmin_on_interval(const Spline& s, double lo, double hi) {
  const ThetaGrid& g = s.grid();
  if (!(lo <= hi) || lo < g.lo() || hi > g.hi())
    throw DomainError("argmin: interval not inside the spline grid");

  std::vector<double> cands{lo, hi};
  const double h = g.spacing();
  for (int i = 0; i + 1 < g.size(); ++i) {
    const double a = g.point(i);
    const double b = g.point(i + 1);
    if (b < lo || a > hi) continue;
    // S'(a + t) = c1 + 2 c2 t + 3 c3 t² on this piece.
    const auto& c = s.piece(i);
    const double qa = 3.0 * c[3], qb = 2.0 * c[2], qc = c[1];
    std::array<double, 2> roots{};
    int nroots = 0;
    if (qa == 0.0) {
      if (qb != 0.0) roots[nroots++] = -qc / qb;
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        // Numerically stable quadratic roots.
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (qb + std::copysign(sq, qb));
        roots[nroots++] = q / qa;
        if (q != 0.0) roots[nroots++] = qc / q;
      }
    }
    for (int k = 0; k < nroots; ++k) {
      const double t = roots[k];
      if (t >= 0.0 && t <= h) {
        const double th = std::min(a + t, b);
        if (th >= lo && th <= hi) cands.push_back(th);
      }
    }
  }
  std::sort(cands.begin(), cands.end());
  SplineMinimum best{cands.front(), s.eval(cands.front())};
  for (double th : cands) {
    const double v = s.eval(th);
    if (v < best.value) best = {th, v};
  }
  return best;
}

}  // namespace cvar_mlmc
