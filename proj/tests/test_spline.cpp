#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"

#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/rng.hpp"
#include "cvar_mlmc/spline.hpp"

using namespace cvar_mlmc;

namespace {

template <class F>
Spline fit(const ThetaGrid& g, F f) {
  std::vector<double> v;
  for (double t : g.points()) v.push_back(f(t));
  return Spline::fit(g, v);
}

double sin_max_error(int n, int order) {
  const ThetaGrid g(0.0, std::numbers::pi, n);
  const Spline s = fit(g, [](double t) { return std::sin(t); });
  double e = 0.0;
  for (double t : g.dense().points()) {
    const double exact = order == 0 ? std::sin(t) : std::cos(t);
    e = std::max(e, std::abs(s.eval(t, order) - exact));
  }
  return e;
}

}  // namespace

TEST_SUITE("spline") {

TEST_CASE("reproduces cubics off the knots") {
  const ThetaGrid g(-1.3, 2.1, 9);
  auto p = [](double t) { return t * t * t - 2.0 * t; };
  const Spline s = fit(g, p);
  for (int i = 0; i < 100; ++i) {
    const double t = -1.3 + 3.4 * (i + 0.37) / 100.0;
    CHECK(s.eval(t) == doctest::Approx(p(t)).epsilon(1e-12).scale(1.0));
    CHECK(s.eval(t, 1) == doctest::Approx(3 * t * t - 2).epsilon(1e-11).scale(1.0));
    CHECK(s.eval(t, 2) == doctest::Approx(6 * t).epsilon(1e-10).scale(1.0));
    CHECK(s.eval(t, 3) == doctest::Approx(6.0).epsilon(1e-9));
  }
}

TEST_CASE("constants and linears") {
  const ThetaGrid g(0.0, 1.0, 5);
  const Spline c = fit(g, [](double) { return 4.25; });
  const Spline l = fit(g, [](double t) { return -3.0 * t + 0.5; });
  for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    CHECK(c.eval(t) == doctest::Approx(4.25));
    CHECK(std::abs(c.eval(t, 1)) < 1e-12);
    CHECK(l.eval(t, 1) == doctest::Approx(-3.0).epsilon(1e-12));
  }
}

TEST_CASE("interpolates exactly at knots") {
  const ThetaGrid g(0.1, 0.9, 17);
  std::vector<double> v;
  SeedStream s(1, 0, 0, 0);
  for (int r = 0; r < g.size(); ++r) v.push_back(s.next_normal());
  const Spline sp = Spline::fit(g, v);
  for (int r = 0; r < g.size(); ++r) CHECK(sp.eval(g.point(r)) == v[r]);
}

TEST_CASE("fourth-order values and third-order derivatives on sin") {
  const double e17 = sin_max_error(17, 0), e33 = sin_max_error(33, 0), e65 = sin_max_error(65, 0);
  CHECK(e17 < 1e-4);
  CHECK(std::log2(e17 / e33) > 3.7);
  CHECK(std::log2(e33 / e65) > 3.7);
  const double d17 = sin_max_error(17, 1), d33 = sin_max_error(33, 1);
  CHECK(std::log2(d17 / d33) > 2.7);

  for (int n : {17, 33, 65}) {
    const ThetaGrid g(0.0, std::numbers::pi, n);
    const Spline s = fit(g, [](double t) { return std::sin(t); });
    const double h = g.spacing();
    CHECK(std::abs(s.eval(std::numbers::pi / 2, 1)) <= h * h * h);
  }
}

TEST_CASE("argmin of a quadratic and of monotone data") {
  const ThetaGrid g(0.0, 2.0, 17);
  const auto m = argmin_on_interval(fit(g, [](double t) { return (t - 1) * (t - 1) + 2; }));
  CHECK(m.theta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.value == doctest::Approx(2.0).epsilon(1e-12));
  const auto b = argmin_on_interval(fit(g, [](double t) { return std::exp(t); }));
  CHECK(b.theta == 0.0);
}

TEST_CASE("argmin of the exact uniform Φ") {
  const double tau = 0.7;
  const ThetaGrid g(0.4, 1.0, 33);
  // Φ(θ) = θ + E(U - θ)⁺ / (1 - τ) = θ + (1 - θ)² / (2 (1 - τ)) on [0, 1].
  const auto m = argmin_on_interval(
      fit(g, [&](double t) { return t + (1 - t) * (1 - t) / (2 * (1 - tau)); }));
  CHECK(m.theta == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(m.value == doctest::Approx(0.85).epsilon(1e-10));
}

TEST_CASE("argmin is never beaten by a dense probe") {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    SeedStream s(17, 0, trial, 0);
    const double lo = s.next_uniform(-3, 3), w = s.next_uniform(0.01, 5);
    const int n = 4 + static_cast<int>(s.next_below(60));
    const ThetaGrid g(lo, lo + w, n);
    std::vector<double> v;
    for (int r = 0; r < n; ++r) v.push_back(s.next_normal() + 0.1 * r);
    const Spline sp = Spline::fit(g, v);
    const auto m = argmin_on_interval(sp);
    for (double t : g.dense().points()) REQUIRE(m.value <= sp.eval(t) + 1e-12);
  }
}

TEST_CASE("interior minimum sitting in the first piece") {
  // Knot rounding once routed the first piece through its left neighbour
  // and reported the boundary instead.
  const ThetaGrid g(2.857212, 3.045, 33);
  auto f = [](double t) { return 2.96 + 27.0 * (t - 2.8619) * (t - 2.8619); };
  const auto m = argmin_on_interval(fit(g, f));
  CHECK(m.theta == doctest::Approx(2.8619).epsilon(1e-9));
  CHECK(m.theta > g.lo());
}

TEST_CASE("piece lookup agrees with both neighbours at every knot") {
  const ThetaGrid g(0.1, 0.7, 13);
  const Spline s = fit(g, [](double t) { return std::sin(7 * t); });
  for (int r = 1; r + 1 < g.size(); ++r) {
    const double t = g.point(r);
    CHECK(s.eval(std::nextafter(t, -1.0)) == doctest::Approx(s.eval(t)).epsilon(1e-12));
    CHECK(s.eval(std::nextafter(t, 9.0), 1) == doctest::Approx(s.eval(t, 1)).epsilon(1e-9));
  }
}

TEST_CASE("errors") {
  const ThetaGrid g(0.0, 1.0, 5);
  const Spline s = fit(g, [](double t) { return t; });
  CHECK_THROWS_AS(s.eval(1.5), DomainError);
  CHECK_THROWS_AS(s.eval(-0.01), DomainError);
  CHECK_THROWS_AS(ThetaGrid(0.0, 1.0, 3), ParameterError);
  CHECK_THROWS_AS(Spline::fit(g, std::vector<double>{1, 2, 3}), ParameterError);
}

}
