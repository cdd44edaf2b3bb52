#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "mushy/cg.hpp"
#include "mushy/coefficients.hpp"
#include "mushy/enthalpy.hpp"
#include "mushy/errors.hpp"
#include "mushy/grid.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Implicit finite-volume step machinery
//
// One step solves the SPD system (V/dt + L_n) y^{n+1} = V/dt y^n + B u_n,
// where L_n is the face-flux stiffness with coefficients frozen at t^n and
// B scatters boundary fluxes into boundary cells. Constants are exact
// steady states and discrete mass balance holds by construction.
// ---------------------------------------------------------------------------

namespace detail {

/// out = (V/dt) y + L y with the given face coefficients.
inline void apply_step_operator(const SpatialGrid& g, double dt,
                                std::span<const double> coeff,
                                std::span<const double> y,
                                std::span<double> out) {
  const double vdt = g.cell_volume() / dt;
  for (size_t i = 0; i < y.size(); ++i) out[i] = vdt * y[i];
  const int faces = g.interior_face_count();
  for (int f = 0; f < faces; ++f) {
    const auto face = g.interior_face(f);
    const double flux =
        coeff[f] * face.area / face.distance * (y[face.cell_lo] - y[face.cell_hi]);
    out[face.cell_lo] += flux;
    out[face.cell_hi] -= flux;
  }
}

inline std::vector<double> step_diagonal(const SpatialGrid& g, double dt,
                                         std::span<const double> coeff) {
  std::vector<double> d(g.cell_count(), g.cell_volume() / dt);
  const int faces = g.interior_face_count();
  for (int f = 0; f < faces; ++f) {
    const auto face = g.interior_face(f);
    const double w = coeff[f] * face.area / face.distance;
    d[face.cell_lo] += w;
    d[face.cell_hi] += w;
  }
  return d;
}

/// Solves (V/dt + L) out = rhs; `guess` seeds the CG iteration.
inline CgStats diffusion_solve(const SpatialGrid& g, double dt,
                               std::span<const double> coeff,
                               std::span<const double> rhs,
                               std::span<const double> guess,
                               std::span<double> out,
                               const LinearSolverSettings& lin) {
  std::copy(guess.begin(), guess.end(), out.begin());
  const auto diag = step_diagonal(g, dt, coeff);
  auto apply = [&](std::span<const double> x, std::span<double> ax) {
    apply_step_operator(g, dt, coeff, x, ax);
  };
  auto prec = [&](std::span<const double> r, std::span<double> z) {
    for (size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
  };
  return pcg_solve(apply, prec, rhs, out, lin);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Frozen-coefficient solve
// ---------------------------------------------------------------------------

struct FrozenProblem {
  SpaceTimeField z;         // coefficient source
  BoundaryControl u;        // Neumann flux on the boundary faces
  std::vector<double> y0;   // initial slice
  EnthalpyParams params;

  void validate() const {
    params.validate();
    if (static_cast<int>(y0.size()) != z.grid.cell_count())
      throw validation_error("frozen problem: y0 size does not match the grid");
    if (u.face_count != z.grid.boundary_face_count())
      throw validation_error("frozen problem: control face count mismatch");
    if (!(u.times == z.times))
      throw validation_error("frozen problem: control time grid mismatch");
  }
};

/// Integrates the linear problem forward with a precomputed coefficient
/// table. Backward Euler; flux slot n enters the step n -> n+1 system.
inline SpaceTimeField solve_frozen_with_table(
    const FaceCoefficientTable& table, const BoundaryControl& u,
    std::span<const double> y0, const LinearSolverSettings& lin = {}) {
  const SpatialGrid& g = table.grid;
  const TimeGrid& times = table.times;
  const double dt = times.dt();
  const int cells = g.cell_count();

  SpaceTimeField y(g, times);
  std::copy(y0.begin(), y0.end(), y.slice(0).begin());

  std::vector<double> rhs(cells);
  const double vdt = g.cell_volume() / dt;
  for (int n = 0; n < times.steps; ++n) {
    auto prev = y.slice(n);
    for (int i = 0; i < cells; ++i) rhs[i] = vdt * prev[i];
    for (int f = 0; f < g.boundary_face_count(); ++f) {
      const auto bf = g.boundary_face(f);
      rhs[bf.cell] += bf.area * u.at(n, f);
    }
    detail::diffusion_solve(g, dt, table.step_slice(n), rhs, prev, y.slice(n + 1),
                            lin);
  }
  return y;
}

/// The frozen-coefficient map: builds the mollified coefficient table from
/// prob.z and integrates forward.
inline SpaceTimeField solve_frozen(const FrozenProblem& prob,
                                   const MollifierStencil& stencil,
                                   const LinearSolverSettings& lin = {},
                                   int threads = 1) {
  prob.validate();
  const auto table = build_face_coefficients(prob.z, prob.params, stencil, threads);
  return solve_frozen_with_table(table, prob.u, prob.y0, lin);
}

// ---------------------------------------------------------------------------
// Nonlinear solve by Picard iteration on the coefficient source
// ---------------------------------------------------------------------------

struct PicardSettings {
  int max_iters = 50;
  double tol_l2 = 1e-8;   // relative L2(Q) distance between iterates
  double damping = 1.0;   // in (0, 1]

  void validate() const {
    if (max_iters < 1) throw validation_error("picard: max_iters must be >= 1");
    if (!(tol_l2 > 0.0)) throw validation_error("picard: tol_l2 must be > 0");
    if (!(damping > 0.0 && damping <= 1.0))
      throw validation_error("picard: damping must lie in (0,1]");
  }
};

struct NonlinearSolveResult {
  SpaceTimeField y;
  std::vector<double> residual_history;
  int iterations = 0;
  double final_damping = 1.0;
};

/// Solves the quasilinear system by damped Picard iteration on the frozen
/// map: z <- (1-d) z + d Phi(z), starting from z == y0 extended constantly
/// in time (or a caller-supplied iterate). Throws solver_error carrying the
/// last residual when max_iters is exhausted.
inline NonlinearSolveResult solve_nonlinear(
    const SpatialGrid& grid, const TimeGrid& times, const BoundaryControl& u,
    std::span<const double> y0, const EnthalpyParams& params,
    const PicardSettings& picard, const MollifierStencil& stencil,
    const LinearSolverSettings& lin = {}, int threads = 1,
    const std::optional<SpaceTimeField>& initial_iterate = std::nullopt) {
  picard.validate();
  params.validate();

  SpaceTimeField z = initial_iterate
                         ? *initial_iterate
                         : SpaceTimeField::constant_in_time(grid, times, y0);
  NonlinearSolveResult result;
  double damping = picard.damping;

  for (int it = 0; it < picard.max_iters; ++it) {
    const auto table = build_face_coefficients(z, params, stencil, threads);
    SpaceTimeField y = solve_frozen_with_table(table, u, y0, lin);

    SpaceTimeField diff = y;
    for (size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= z.values[i];
    const double rel = l2_norm_spacetime(diff) /
                       std::max(l2_norm_spacetime(y), 1e-300);
    result.residual_history.push_back(rel);
    result.iterations = it + 1;

    // z <- (1-d) z + d y
    for (size_t i = 0; i < z.values.size(); ++i)
      z.values[i] += damping * (y.values[i] - z.values[i]);

    if (rel <= picard.tol_l2) {
      result.y = std::move(y);
      result.final_damping = damping;
      return result;
    }

    const size_t h = result.residual_history.size();
    if (h >= 3 && result.residual_history[h - 1] > result.residual_history[h - 2] &&
        result.residual_history[h - 2] > result.residual_history[h - 3])
      damping = std::max(0.5 * damping, 1.0 / 64.0);
  }
  throw solver_error("picard iteration did not converge",
                     result.residual_history.back());
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct EnergyReport {
  bool degenerate = false;
  double energy_ratio = 0.0;           // empirical constant of the energy bound
  double time_derivative_ratio = 0.0;  // empirical constant of the dual bound
};

namespace detail {

/// Discrete H1-dual norm of a cell function w (as the functional
/// psi -> sum vol w psi) via the Riesz solve (M + K) r = M w.
inline double dual_norm(const SpatialGrid& g, std::span<const double> w,
                        const LinearSolverSettings& lin) {
  const int cells = g.cell_count();
  const double vol = g.cell_volume();
  std::vector<double> rhs(cells), r(cells, 0.0), diag(cells, vol);
  for (int i = 0; i < cells; ++i) rhs[i] = vol * w[i];
  const int faces = g.interior_face_count();
  for (int f = 0; f < faces; ++f) {
    const auto face = g.interior_face(f);
    const double ww = face.area / face.distance;
    diag[face.cell_lo] += ww;
    diag[face.cell_hi] += ww;
  }
  auto apply = [&](std::span<const double> x, std::span<double> ax) {
    for (int i = 0; i < cells; ++i) ax[i] = vol * x[i];
    for (int f = 0; f < faces; ++f) {
      const auto face = g.interior_face(f);
      const double flux = face.area / face.distance * (x[face.cell_lo] - x[face.cell_hi]);
      ax[face.cell_lo] += flux;
      ax[face.cell_hi] -= flux;
    }
  };
  auto prec = [&](std::span<const double> rr, std::span<double> zz) {
    for (int i = 0; i < cells; ++i) zz[i] = rr[i] / diag[i];
  };
  pcg_solve(apply, prec, rhs, std::span<double>(r), lin);
  double s = 0.0;
  for (int i = 0; i < cells; ++i) s += rhs[i] * r[i];
  return std::sqrt(std::max(0.0, s));
}

}  // namespace detail

/// Empirical constants of the energy estimate: the max over time of
/// [ |y(t)|_2^2 + lambda^alpha * int_0^t ||y||_V^2 ] over
/// [ |y0|_2^2 + lambda^{-alpha} ||u||^2 ], and the matching ratio for the
/// time-derivative dual bound.
inline EnergyReport energy_report(const SpaceTimeField& y, const BoundaryControl& u,
                                  const EnthalpyParams& params,
                                  const LinearSolverSettings& lin = {}) {
  const SpatialGrid& g = y.grid;
  const double la = params.lambda_alpha();
  const double y0sq = std::pow(l2_norm_space(g, y.slice(0)), 2);
  const double usq = std::pow(control_norm(g, u), 2);
  const double denom = y0sq + usq / la;

  EnergyReport rep;
  if (denom < 1e-28) {
    rep.degenerate = true;
    return rep;
  }

  const double dt = y.times.dt();
  double vsum = 0.0, best = 0.0;
  for (int n = 0; n <= y.times.steps; ++n) {
    if (n > 0) vsum += dt * std::pow(v_norm(g, y.slice(n)), 2);
    const double val = std::pow(l2_norm_space(g, y.slice(n)), 2) + la * vsum;
    best = std::max(best, val);
  }
  rep.energy_ratio = best / denom;

  double dsum = 0.0;
  std::vector<double> w(g.cell_count());
  for (int n = 1; n <= y.times.steps; ++n) {
    auto a = y.slice(n - 1), b = y.slice(n);
    for (int i = 0; i < g.cell_count(); ++i) w[i] = (b[i] - a[i]) / dt;
    dsum += dt * std::pow(detail::dual_norm(g, w, lin), 2);
  }
  rep.time_derivative_ratio = dsum / (denom / la);
  return rep;
}

struct ClassicalResidualReport {
  bool solid_present = false;
  double solid_rms = 0.0;
  size_t solid_points = 0;
  bool liquid_present = false;
  double liquid_rms = 0.0;
  size_t liquid_points = 0;
};

/// Measures how closely the state obeys the pure-phase heat equations away
/// from the transition: the RMS of (central dy/dt - k Delta y) over interior
/// space-time points whose full stencil stays in {y <= -2 lambda^(1/4)}
/// (solid) resp. {y >= rho + 2 lambda^(1/4)} (liquid).
inline ClassicalResidualReport classical_region_residual(
    const SpaceTimeField& y, const EnthalpyParams& params, double interior_margin) {
  if (!(params.alpha < 1.0 / 26.0))
    throw validation_error(
        "classical_region_residual: requires alpha < 1/26");
  if (!(interior_margin >= params.lambda))
    throw validation_error(
        "classical_region_residual: interior margin must be >= lambda");

  const SpatialGrid& g = y.grid;
  const double dt = y.times.dt();
  const double thr = 2.0 * std::pow(params.lambda, 0.25);
  const double lo_solid = -thr;                      // y <= lo_solid
  const double hi_liquid = params.latent_heat + thr; // y >= hi_liquid

  auto laplacian = [&](std::span<const double> f, int idx) {
    const double hx = g.spacing(0);
    double s = (f[idx - 1] - 2.0 * f[idx] + f[idx + 1]) / (hx * hx);
    if (g.dimension == 2) {
      const double hy = g.spacing(1);
      const int st = g.cells[0];
      s += (f[idx - st] - 2.0 * f[idx] + f[idx + st]) / (hy * hy);
    }
    return s;
  };

  auto interior = [&](int idx) {
    const int ix = g.ix_of(idx), iy = g.iy_of(idx);
    if (ix == 0 || ix == g.cells[0] - 1) return false;
    if (g.dimension == 2 && (iy == 0 || iy == g.cells[1] - 1)) return false;
    return g.distance_to_boundary(idx) >= interior_margin;
  };

  ClassicalResidualReport rep;
  double ssum = 0.0, lsum = 0.0;
  for (int n = 1; n < y.times.steps; ++n) {
    auto prev = y.slice(n - 1), cur = y.slice(n), next = y.slice(n + 1);
    for (int i = 0; i < g.cell_count(); ++i) {
      if (!interior(i)) continue;
      auto stencil_in = [&](auto pred) {
        if (!pred(prev[i]) || !pred(cur[i]) || !pred(next[i])) return false;
        if (!pred(cur[i - 1]) || !pred(cur[i + 1])) return false;
        if (g.dimension == 2) {
          const int st = g.cells[0];
          if (!pred(cur[i - st]) || !pred(cur[i + st])) return false;
        }
        return true;
      };
      const double ydot = (next[i] - prev[i]) / (2.0 * dt);
      if (stencil_in([&](double v) { return v <= lo_solid; })) {
        const double r = ydot - params.k_solid * laplacian(cur, i);
        ssum += r * r;
        ++rep.solid_points;
      } else if (stencil_in([&](double v) { return v >= hi_liquid; })) {
        const double r = ydot - params.k_liquid * laplacian(cur, i);
        lsum += r * r;
        ++rep.liquid_points;
      }
    }
  }
  if (rep.solid_points > 0) {
    rep.solid_present = true;
    rep.solid_rms = std::sqrt(ssum / rep.solid_points);
  }
  if (rep.liquid_points > 0) {
    rep.liquid_present = true;
    rep.liquid_rms = std::sqrt(lsum / rep.liquid_points);
  }
  return rep;
}

}  // namespace mushy
