#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mushy/coefficients.hpp"
#include "mushy/errors.hpp"
#include "mushy/forward.hpp"
#include "mushy/grid.hpp"
#include "mushy/mushy_set.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Dual backward system. The backward step from level n+1 to level n reuses
// the forward step operator of n -> n+1 (same face coefficients), so the
// control-to-state map and the adjoint are exact transposes of each other:
//   <y(T), p(T)> - <y(0), p(0)> = sum_n dt sum_f area u[n][f] p[n][trace]
// holds to solver precision, and the penalized gradient u - p|_Sigma is the
// exact gradient of the discrete functional.
// ---------------------------------------------------------------------------

struct TerminalPenaltyData {
  double epsilon = 1.0;
  TargetSet target;
  double mu = 0.05;
  double latent_heat = 1.0;

  void validate() const {
    if (!(epsilon > 0.0))
      throw validation_error("terminal penalty: epsilon must be > 0");
    if (!(target.measure > 0.0))
      throw validation_error("terminal penalty: target must be nonempty");
  }
};

/// Terminal datum of the dual system: (1/eps) * 1_target *
/// [ (yT + mu)^- - (yT - rho - mu)^+ ]. Zero outside the target and on
/// states already inside [-mu, rho+mu]; at most one branch is active per
/// cell.
inline std::vector<double> terminal_condition(std::span<const double> yT,
                                              const TerminalPenaltyData& data) {
  data.validate();
  std::vector<double> p(yT.size(), 0.0);
  for (size_t i = 0; i < yT.size(); ++i) {
    if (!data.target.mask[i]) continue;
    const double below = std::max(0.0, -(yT[i] + data.mu));
    const double above = std::max(0.0, yT[i] - data.latent_heat - data.mu);
    p[i] = (below - above) / data.epsilon;
  }
  return p;
}

namespace detail {

/// Backward integration with an optional step-index shift in the coefficient
/// lookup. shift = 0 is the exact transpose; a nonzero shift deliberately
/// breaks transposition (negative control for the verification suite).
inline SpaceTimeField solve_backward_shifted(const FaceCoefficientTable& table,
                                             std::span<const double> pT,
                                             const LinearSolverSettings& lin,
                                             int shift) {
  const SpatialGrid& g = table.grid;
  const TimeGrid& times = table.times;
  const int cells = g.cell_count();
  const double vdt = g.cell_volume() / times.dt();

  SpaceTimeField p(g, times);
  std::copy(pT.begin(), pT.end(), p.slice(times.steps).begin());

  std::vector<double> rhs(cells);
  for (int n = times.steps - 1; n >= 0; --n) {
    auto next = p.slice(n + 1);
    for (int i = 0; i < cells; ++i) rhs[i] = vdt * next[i];
    const int k = std::clamp(n + shift, 0, times.steps - 1);
    diffusion_solve(g, times.dt(), table.step_slice(k), rhs, next, p.slice(n), lin);
  }
  return p;
}

}  // namespace detail

/// Integrates the dual system backward from p(T) = pT with homogeneous
/// Neumann boundary. Level n of the result pairs with control slot n in the
/// duality identity and in the gradient.
inline SpaceTimeField solve_backward(const FaceCoefficientTable& table,
                                     std::span<const double> pT,
                                     const LinearSolverSettings& lin = {}) {
  return detail::solve_backward_shifted(table, pT, lin, 0);
}

/// Boundary trace of the adjoint as a control-shaped object: slot n holds
/// the boundary-cell values of p at level n.
inline BoundaryControl adjoint_boundary_trace(const SpaceTimeField& p) {
  const SpatialGrid& g = p.grid;
  BoundaryControl tr(p.times, g.boundary_face_count());
  for (int n = 0; n < p.times.steps; ++n) {
    auto sl = p.slice(n);
    for (int f = 0; f < g.boundary_face_count(); ++f)
      tr.at(n, f) = sl[g.boundary_face(f).cell];
  }
  return tr;
}

/// Relative residual of the duality identity
///   <y(T), p(T)> - <y(0), p(0)> = int_Sigma u p
/// for a forward trajectory y driven by u and an adjoint trajectory p on the
/// same coefficient table.
inline double duality_check(const SpaceTimeField& y, const BoundaryControl& u,
                            const SpaceTimeField& p) {
  const SpatialGrid& g = y.grid;
  const int N = y.times.steps;
  const double terminal = l2_inner_space(g, y.slice(N), p.slice(N));
  const double initial = l2_inner_space(g, y.slice(0), p.slice(0));

  double boundary = 0.0;
  const double dt = y.times.dt();
  for (int n = 0; n < N; ++n) {
    auto sl = p.slice(n);
    for (int f = 0; f < u.face_count; ++f)
      boundary += dt * g.boundary_face(f).area * u.at(n, f) *
                  sl[g.boundary_face(f).cell];
  }
  const double defect = terminal - initial - boundary;
  const double scale =
      std::abs(terminal) + std::abs(initial) + std::abs(boundary) + 1e-30;
  return std::abs(defect) / scale;
}

}  // namespace mushy
