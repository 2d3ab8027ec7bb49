#pragma once

#include <array>
#include <span>
#include <vector>

namespace cvar_mlmc {

/// n equidistant points on [lo, hi].
class ThetaGrid {
 public:
  ThetaGrid(double lo, double hi, int n);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int size() const { return n_; }
  double spacing() const { return (hi_ - lo_) / (n_ - 1); }
  double point(int r) const;
  std::vector<double> points() const;
  /// Dense probe grid on the same interval with max(10 n, 1000) points.
  ThetaGrid dense() const;
  bool contains(double theta) const;

 private:
  double lo_, hi_;
  int n_;
};

/// Uniform cubic spline with not-a-knot end conditions.
class Spline {
 public:
  static Spline fit(const ThetaGrid& grid, std::span<const double> values);

  const ThetaGrid& grid() const { return grid_; }
  /// Value (order 0) or derivative (orders 1..3). Throws DomainError
  /// outside the grid interval.
  double eval(double theta, int order = 0) const;
  std::vector<double> eval(std::span<const double> thetas, int order = 0) const;
  /// Supremum of |S^(order)| over the probe points.
  double sup_norm(const ThetaGrid& probe, int order) const;
  /// Coefficients of piece i: c0 + c1 t + c2 t² + c3 t³ with t = θ - θ_i.
  const std::array<double, 4>& piece(int i) const { return coeffs_.at(static_cast<std::size_t>(i)); }

 private:
  explicit Spline(ThetaGrid grid) : grid_(grid) {}
  ThetaGrid grid_;
  std::vector<std::array<double, 4>> coeffs_;
  double last_value_ = 0.0;
};

struct SplineMinimum {
  double theta;
  double value;
};

/// Global minimiser of the spline over [lo, hi] ⊆ grid interval: all
/// stationary points per interval plus the endpoints; ties go to the
/// smallest θ.
SplineMinimum argmin_on_interval(const Spline& s, double lo, double hi);
inline SplineMinimum argmin_on_interval(const Spline& s) {
  return argmin_on_interval(s, s.grid().lo(), s.grid().hi());
}

}  // namespace cvar_mlmc
