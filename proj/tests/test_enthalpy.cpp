#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mushy/enthalpy.hpp"
#include "mushy/grid.hpp"

using namespace mushy;

namespace {

EnthalpyParams desk_params() {
  EnthalpyParams p;
  p.k_solid = 2.0;
  p.k_liquid = 3.0;
  p.latent_heat = 1.0;
  p.lambda = 1e-4;
  p.alpha = 0.25;
  p.mu = 0.05;
  p.validate();
  return p;
}

// Brute-force Simpson integration, independent of the quadrature module.
template <class F>
double simpson(F&& f, double a, double b, int n) {
  if (n % 2 == 1) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Direct dense evaluation of the mollified coefficient definition:
// (1/lambda) int_t^{t+lambda} ds int h(z(s, x - lambda xi)) phi(xi) dxi,
// with clamped field evaluation, at roughly 10x the default resolution.
double dense_mollified_coefficient_1d(const SpaceTimeField& z, double t,
                                      double x, const EnthalpyParams& p,
                                      const MollifierSpec& spec) {
  const int ns = 64;
  double acc = 0.0;
  for (int j = 0; j < ns; ++j) {
    const double s = t + (j + 0.5) * p.lambda / ns;
    auto integrand = [&](double xi) {
      const double v = extend_field(z, s, {x - p.lambda * xi, 0.0});
      return smoothed_conductivity(v, p) * mollifier_weight({xi, 0.0}, spec);
    };
    acc += simpson(integrand, -1.0, 1.0, 4096);
  }
  return acc / ns;
}

}  // namespace

TEST_CASE("temperature is the piecewise-linear enthalpy law") {
  auto p = desk_params();
  CHECK(enthalpy_to_temperature(-2.0, p) == Catch::Approx(-4.0).margin(1e-15));
  CHECK(enthalpy_to_temperature(0.0, p) == 0.0);
  CHECK(enthalpy_to_temperature(0.999, p) == 0.0);
  CHECK(enthalpy_to_temperature(2.0, p) == Catch::Approx(3.0).margin(1e-15));

  // Monotone non-decreasing.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-4.0, 5.0);
  for (int k = 0; k < 400; ++k) {
    double a = unif(rng), b = unif(rng);
    if (a > b) std::swap(a, b);
    CHECK(enthalpy_to_temperature(a, p) <= enthalpy_to_temperature(b, p) + 1e-15);
  }
}

TEST_CASE("transition conductivity hits its anchors") {
  auto p = desk_params();
  const double la = p.lambda_alpha();
  CHECK(la == Catch::Approx(0.1).margin(1e-15));

  CHECK(transition_conductivity(-la, p) == Catch::Approx(2.0).margin(1e-14));
  CHECK(transition_conductivity(p.latent_heat + la, p) ==
        Catch::Approx(3.0).margin(1e-14));
  CHECK(transition_conductivity(0.5 * p.latent_heat, p) ==
        Catch::Approx(la).margin(1e-15));
  CHECK(transition_conductivity(0.0, p) == Catch::Approx(la).margin(1e-14));

  // Cubic arc with zero end slopes, evaluated at the arc midpoint.
  CHECK(transition_conductivity(-la / 2.0, p) ==
        Catch::Approx((2.0 + 0.1) / 2.0).margin(1e-14));

  CHECK_THROWS_AS(transition_conductivity(-la * 1.0001, p), std::domain_error);
  CHECK_THROWS_AS(transition_conductivity(p.latent_heat + la * 1.0001, p),
                  std::domain_error);
}

TEST_CASE("smoothed conductivity branches, band and slope bound") {
  auto p = desk_params();
  const double la = p.lambda_alpha();
  CHECK(smoothed_conductivity(-1.0, p) == 2.0);
  CHECK(smoothed_conductivity(p.latent_heat + 1.0, p) == 3.0);
  CHECK(smoothed_conductivity(0.5 * p.latent_heat, p) == Catch::Approx(la));

  // Band and numerical slope bound on a dense sample of the band.
  const double lo = -la, hi = p.latent_heat + la;
  const double slope_cap = 1.5 * p.k_star() / la;
  double max_slope = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double r = lo + (hi - lo) * (i + 0.5) / n;
    const double v = smoothed_conductivity(r, p);
    CHECK(v >= la - 1e-14);
    CHECK(v <= p.k_star() + 1e-14);
    const double h = 1e-6 * la;
    if (r - h > lo && r + h < hi) {
      const double d =
          (smoothed_conductivity(r + h, p) - smoothed_conductivity(r - h, p)) /
          (2.0 * h);
      max_slope = std::max(max_slope, std::abs(d));
    }
  }
  CHECK(max_slope <= slope_cap * (1.0 + 1e-9));

  // Continuity across the outer joins.
  for (double r0 : {-la, p.latent_heat + la}) {
    const double eps = 1e-12;
    CHECK(smoothed_conductivity(r0 - eps, p) ==
          Catch::Approx(smoothed_conductivity(r0 + eps, p)).margin(1e-9));
  }
}

TEST_CASE("mollifier normalization against a brute-force oracle") {
  auto spec1 = make_mollifier_spec(1);
  CHECK(mollifier_weight({1.5, 0.0}, spec1) == 0.0);
  CHECK(mollifier_weight({-1.0, 0.0}, spec1) == 0.0);

  const double oracle_mass_1d =
      simpson([](double x) { return std::exp(-1.0 / (1.0 - x * x)); }, -1.0 + 1e-12,
              1.0 - 1e-12, 2000000);
  const double c_oracle = 1.0 / oracle_mass_1d;
  CHECK(mollifier_weight({0.0, 0.0}, spec1) ==
        Catch::Approx(c_oracle * std::exp(-1.0)).epsilon(1e-9));

  // Numerical integral of the normalized weight is 1.
  const double total = simpson(
      [&](double x) { return mollifier_weight({x, 0.0}, spec1); }, -1.0 + 1e-12,
      1.0 - 1e-12, 2000000);
  CHECK(total == Catch::Approx(1.0).margin(1e-10));

  auto spec2 = make_mollifier_spec(2);
  const double total2 = simpson(
      [&](double r) {
        return 2.0 * M_PI * r * mollifier_weight({r, 0.0}, spec2);
      },
      0.0, 1.0 - 1e-12, 2000000);
  CHECK(total2 == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("mollifier stencil weights form a convex combination") {
  for (int d : {1, 2}) {
    for (int order : {4, 8, 16}) {
      auto st = make_mollifier_stencil(make_mollifier_spec(d, order));
      double sum = 0.0;
      for (double w : st.weights) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(sum == Catch::Approx(1.0).margin(1e-13));
      for (auto& o : st.offsets)
        CHECK(o[0] * o[0] + o[1] * o[1] < 1.0);
    }
  }
}

TEST_CASE("mollified coefficient of constant fields") {
  auto p = desk_params();
  auto spec = make_mollifier_spec(1);
  auto st = make_mollifier_stencil(spec);
  auto g = SpatialGrid::line(1.0, 32);
  TimeGrid t(0.1, 16);

  for (double c : {-1.0, -0.5, 0.3, 0.5, 2.5}) {
    SpaceTimeField z(g, t, c);
    const double expected = smoothed_conductivity(c, p);
    CHECK(mollified_coefficient(z, 0.03, {0.5, 0.0}, p, st) ==
          Catch::Approx(expected).margin(1e-10));
    CHECK(mollified_coefficient(z, t.horizon, {0.93, 0.0}, p, st) ==
          Catch::Approx(expected).margin(1e-10));
  }

  SpaceTimeField solid(g, t, -1.0);
  CHECK(mollified_coefficient(solid, 0.0, {0.5, 0.0}, p, st) ==
        Catch::Approx(2.0).margin(1e-12));

  SpaceTimeField any(g, t, 0.0);
  CHECK_THROWS_AS(mollified_coefficient(any, -0.01, {0.5, 0.0}, p, st),
                  std::domain_error);
  CHECK_THROWS_AS(mollified_coefficient(any, t.horizon + 0.01, {0.5, 0.0}, p, st),
                  std::domain_error);
}

TEST_CASE("mollified coefficient of a ramp against the dense oracle") {
  // Large lambda so the mollification acts across several cells.
  EnthalpyParams p = desk_params();
  p.lambda = 0.02;
  p.alpha = 0.25;
  p.validate();

  auto g = SpatialGrid::line(1.0, 128);
  TimeGrid t(0.1, 32);
  SpaceTimeField z(g, t);
  // Ramp through the whole transition band, drifting linearly in time (the
  // midpoint time average is exact for linear drift).
  for (int n = 0; n <= t.steps; ++n)
    for (int i = 0; i < g.cell_count(); ++i) {
      const double x = g.cell_center(i)[0];
      z.at(n, i) = -0.6 + 2.4 * x + 0.05 * t.time_of(n);
    }

  auto spec = make_mollifier_spec(1, 8);
  auto st8 = make_mollifier_stencil(spec);
  auto st32 = make_mollifier_stencil(make_mollifier_spec(1, 32));

  for (double x : {0.25, 0.45, 0.55, 0.7}) {
    for (double tt : {0.0, 0.04}) {
      const double oracle = dense_mollified_coefficient_1d(z, tt, x, p, spec);
      const double v8 = mollified_coefficient(z, tt, {x, 0.0}, p, st8);
      const double v32 = mollified_coefficient(z, tt, {x, 0.0}, p, st32);
      CHECK(v8 == Catch::Approx(oracle).epsilon(2e-2));
      CHECK(v32 == Catch::Approx(oracle).epsilon(5e-4));
    }
  }
}

TEST_CASE("mollified coefficient stays in the band for rough fields") {
  auto p = desk_params();
  auto st = make_mollifier_stencil(make_mollifier_spec(1));
  auto g = SpatialGrid::line(1.0, 48);
  TimeGrid t(0.2, 24);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(-6.0, 7.0);

  SpaceTimeField z(g, t);
  for (auto& v : z.values) v = unif(rng);

  std::uniform_real_distribution<double> ux(0.0, 1.0), ut(0.0, t.horizon);
  for (int k = 0; k < 300; ++k) {
    const double v = mollified_coefficient(z, ut(rng), {ux(rng), 0.0}, p, st);
    CHECK(v >= p.lambda_alpha() - 1e-12);
    CHECK(v <= p.k_star() + 1e-12);
  }
}

TEST_CASE("params validation names the failing constraint") {
  EnthalpyParams p = desk_params();
  p.k_solid = -1.0;
  CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("k1"));
  p = desk_params();
  p.alpha = 1.5;
  CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("alpha"));
  p = desk_params();
  p.lambda = 0.9;  // lambda^alpha close to 1, above min(k1,k2) when k small
  p.k_liquid = 0.5;
  CHECK_THROWS_AS(p.validate(), validation_error);
}
