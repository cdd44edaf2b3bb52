#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mushy/adjoint.hpp"
#include "mushy/forward.hpp"

using namespace mushy;

namespace {

EnthalpyParams desk_params() {
  EnthalpyParams p;
  p.k_solid = 2.0;
  p.k_liquid = 1.0;
  p.latent_heat = 1.0;
  p.lambda = 1e-4;
  p.alpha = 0.25;
  p.mu = 0.05;
  return p;
}

/// Time-varying random coefficient source; keeps the table genuinely
/// step-dependent so transposition is actually exercised.
FaceCoefficientTable random_table(const SpatialGrid& g, const TimeGrid& t,
                                  const EnthalpyParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-2.0, 3.0);
  SpaceTimeField z(g, t);
  for (auto& v : z.values) v = unif(rng);
  auto st = make_mollifier_stencil(make_mollifier_spec(g.dimension));
  return build_face_coefficients(z, p, st);
}

std::vector<double> random_slice(const SpatialGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> f(g.cell_count());
  for (auto& v : f) v = unif(rng);
  return f;
}

BoundaryControl random_control(const SpatialGrid& g, const TimeGrid& t,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto u = BoundaryControl::zeros(g, t);
  for (auto& v : u.values) v = unif(rng);
  return u;
}

}  // namespace

TEST_CASE("terminal condition branches") {
  auto g = SpatialGrid::line(1.0, 16);
  TargetSet target = TargetSet::from_boxes(g, {{0.25, 0.75, 0.0, 0.0}});
  TerminalPenaltyData data{0.01, target, 0.05, 1.0};

  SECTION("states inside the band produce zero") {
    std::vector<double> yT(g.cell_count(), 0.5);
    for (double v : terminal_condition(yT, data)) CHECK(v == 0.0);
  }

  SECTION("negative-part branch, delta over epsilon") {
    const double delta = 0.2;
    std::vector<double> yT(g.cell_count(), -data.mu - delta);
    auto pT = terminal_condition(yT, data);
    for (int i = 0; i < g.cell_count(); ++i) {
      if (target.mask[i])
        CHECK(pT[i] == Catch::Approx(delta / data.epsilon).margin(1e-12));
      else
        CHECK(pT[i] == 0.0);
    }
  }

  SECTION("piecewise-linear slopes by finite differences") {
    auto slope_at = [&](double y) {
      const double h = 1e-7;
      std::vector<double> lo(g.cell_count(), y - h), hi(g.cell_count(), y + h);
      const auto a = terminal_condition(lo, data), b = terminal_condition(hi, data);
      int cell = 0;
      while (!target.mask[cell]) ++cell;
      return (b[cell] - a[cell]) / (2.0 * h);
    };
    CHECK(slope_at(-1.0) == Catch::Approx(-1.0 / data.epsilon).epsilon(1e-6));
    CHECK(slope_at(0.5) == Catch::Approx(0.0).margin(1e-12));
    CHECK(slope_at(2.0) == Catch::Approx(-1.0 / data.epsilon).epsilon(1e-6));
  }
}

TEST_CASE("backward solve preserves zero and constants") {
  auto p = desk_params();
  auto g = SpatialGrid::line(1.0, 24);
  TimeGrid t(0.1, 12);
  std::mt19937_64 rng(11);
  auto table = random_table(g, t, p, rng);

  std::vector<double> zero(g.cell_count(), 0.0);
  auto p0 = solve_backward(table, zero);
  for (double v : p0.values) CHECK(v == 0.0);

  std::vector<double> c(g.cell_count(), -2.3);
  auto pc = solve_backward(table, c);
  for (double v : pc.values) CHECK(v == Catch::Approx(-2.3).margin(1e-10));
}

TEST_CASE("backward step is the exact transpose of the forward step") {
  auto p = desk_params();
  std::mt19937_64 rng(42);
  LinearSolverSettings lin;
  lin.cg_tol = 1e-13;

  struct Case {
    SpatialGrid g;
    TimeGrid t;
  };
  const Case cases[] = {
      {SpatialGrid::line(1.0, 16), TimeGrid(0.1, 8)},
      {SpatialGrid::line(1.0, 64), TimeGrid(0.1, 32)},
      {SpatialGrid::box(1.0, 0.8, 8, 6), TimeGrid(0.05, 8)},
  };
  for (const auto& c : cases) {
    auto table = random_table(c.g, c.t, p, rng);
    for (int probe = 0; probe < 20; ++probe) {
      const auto a = random_slice(c.g, rng);
      const auto pT = random_slice(c.g, rng);
      auto y = solve_frozen_with_table(table, BoundaryControl::zeros(c.g, c.t), a,
                                       lin);
      auto adj = solve_backward(table, pT, lin);
      const double lhs = l2_inner_space(c.g, y.slice(c.t.steps), pT);
      const double rhs = l2_inner_space(c.g, a, adj.slice(0));
      CHECK(std::abs(lhs - rhs) <=
            1e-10 * (std::abs(lhs) + std::abs(rhs) + 1e-30));
    }
  }
}

TEST_CASE("duality identity residual stays below 1e-9") {
  auto p = desk_params();
  std::mt19937_64 rng(7);
  LinearSolverSettings lin;

  auto g = SpatialGrid::line(1.0, 32);
  TimeGrid t(0.1, 16);
  auto table = random_table(g, t, p, rng);

  SECTION("trivial zero case") {
    std::vector<double> zero(g.cell_count(), 0.0);
    auto y = solve_frozen_with_table(table, BoundaryControl::zeros(g, t), zero, lin);
    auto adj = solve_backward(table, zero, lin);
    CHECK(duality_check(y, BoundaryControl::zeros(g, t), adj) == 0.0);
  }

  SECTION("initial-data path") {
    for (int probe = 0; probe < 20; ++probe) {
      auto y0 = random_slice(g, rng);
      auto pT = random_slice(g, rng);
      auto u = BoundaryControl::zeros(g, t);
      auto y = solve_frozen_with_table(table, u, y0, lin);
      auto adj = solve_backward(table, pT, lin);
      CHECK(duality_check(y, u, adj) <= 1e-9);
    }
  }

  SECTION("boundary-term path") {
    std::vector<double> zero(g.cell_count(), 0.0);
    for (int probe = 0; probe < 20; ++probe) {
      auto u = random_control(g, t, rng);
      auto pT = random_slice(g, rng);
      auto y = solve_frozen_with_table(table, u, zero, lin);
      auto adj = solve_backward(table, pT, lin);
      CHECK(duality_check(y, u, adj) <= 1e-9);
    }
  }

  SECTION("combined 2D path") {
    auto g2 = SpatialGrid::box(1.0, 1.0, 8, 8);
    TimeGrid t2(0.05, 8);
    auto table2 = random_table(g2, t2, p, rng);
    for (int probe = 0; probe < 20; ++probe) {
      auto y0 = random_slice(g2, rng);
      auto pT = random_slice(g2, rng);
      auto u = random_control(g2, t2, rng);
      auto y = solve_frozen_with_table(table2, u, y0, lin);
      auto adj = solve_backward(table2, pT, lin);
      CHECK(duality_check(y, u, adj) <= 1e-9);
    }
  }
}

TEST_CASE("a shifted coefficient lookup breaks duality (negative control)") {
  auto p = desk_params();
  std::mt19937_64 rng(3);
  auto g = SpatialGrid::line(1.0, 32);
  TimeGrid t(0.1, 16);
  auto table = random_table(g, t, p, rng);

  auto y0 = random_slice(g, rng);
  auto pT = random_slice(g, rng);
  auto u = random_control(g, t, rng);
  auto y = solve_frozen_with_table(table, u, y0);
  auto broken = detail::solve_backward_shifted(table, pT, {}, 1);
  CHECK(duality_check(y, u, broken) > 1e-7);
}
