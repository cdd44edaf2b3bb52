#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "mushy/adjoint.hpp"
#include "mushy/coefficients.hpp"
#include "mushy/errors.hpp"
#include "mushy/forward.hpp"
#include "mushy/grid.hpp"
#include "mushy/mushy_set.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Penalized boundary control for the frozen-coefficient system:
//
//   J(u) = 1/2 ||u||^2_Sigma
//        + 1/(2 eps) int_target ((y(T)+mu)^-)^2 + ((y(T)-rho-mu)^+)^2,
//
// minimized by conjugate gradients in control space with an exact line
// search (the cost is piecewise quadratic and convex along any ray, so the
// directional derivative is piecewise linear and monotone). An epsilon
// continuation with warm starts drives the terminal violation to zero, and
// an outer relaxation loop matches the coefficient source z with the
// controlled trajectory it generates.
// ---------------------------------------------------------------------------

struct PenalizedProblem {
  SpaceTimeField z;        // frozen coefficient source
  std::vector<double> y0;  // initial state
  TargetSet target;
  double epsilon = 1.0;
  EnthalpyParams params;

  void validate() const {
    params.validate();
    if (!(epsilon > 0.0))
      throw validation_error("penalized problem: epsilon must be > 0");
    if (static_cast<int>(y0.size()) != z.grid.cell_count())
      throw validation_error("penalized problem: y0 size mismatch");
    if (static_cast<int>(target.mask.size()) != z.grid.cell_count())
      throw validation_error("penalized problem: target mask size mismatch");
  }
};

struct EpsSchedule {
  double eps0 = 1.0;
  double factor = 0.25;
  double floor = 1e-6;

  void validate() const {
    if (!(eps0 > 0.0)) throw validation_error("eps schedule: eps0 must be > 0");
    if (!(factor > 0.0 && factor < 1.0))
      throw validation_error("eps schedule: factor must lie in (0,1)");
    if (!(floor > 0.0 && floor <= eps0))
      throw validation_error("eps schedule: floor must lie in (0, eps0]");
  }
};

struct InnerCgSettings {
  int max_iters = 300;
  double tol_grad = 1e-8;  // relative: ||grad|| <= tol * max(1, ||u||)

  void validate() const {
    if (max_iters < 1) throw validation_error("inner cg: max_iters must be >= 1");
    if (!(tol_grad > 0.0)) throw validation_error("inner cg: tol_grad must be > 0");
  }
};

struct OuterLoopSettings {
  int max_outer = 20;
  double tol_outer = 1e-3;  // relative L2(Q) stagnation of z
  EpsSchedule eps_schedule;
  InnerCgSettings inner_cg;
  double relaxation = 1.0;
  // Early-stop threshold for the continuation, relative to
  // sqrt(measure(target)); 0 disables early stopping.
  double violation_tol_rel = 1e-3;

  void validate() const {
    if (max_outer < 1) throw validation_error("outer loop: max_outer must be >= 1");
    if (!(tol_outer > 0.0)) throw validation_error("outer loop: tol_outer must be > 0");
    if (!(relaxation > 0.0 && relaxation <= 1.0))
      throw validation_error("outer loop: relaxation must lie in (0,1]");
    if (violation_tol_rel < 0.0)
      throw validation_error("outer loop: violation_tol_rel must be >= 0");
    eps_schedule.validate();
    inner_cg.validate();
  }
};

/// L2(target) norms of the two violation parts of a terminal slice.
struct ViolationNorms {
  double below = 0.0;  // ||(y(T)+mu)^-||
  double above = 0.0;  // ||(y(T)-rho-mu)^+||
  double sum() const { return below + above; }
  double max() const { return std::max(below, above); }
};

inline ViolationNorms violation_norms(const SpatialGrid& g, const TargetSet& target,
                                      std::span<const double> yT, double mu,
                                      double rho) {
  double b = 0.0, a = 0.0;
  for (int i = 0; i < g.cell_count(); ++i) {
    if (!target.mask[i]) continue;
    const double below = std::max(0.0, -(yT[i] + mu));
    const double above = std::max(0.0, yT[i] - rho - mu);
    b += below * below;
    a += above * above;
  }
  const double vol = g.cell_volume();
  return {std::sqrt(vol * b), std::sqrt(vol * a)};
}

namespace detail {

/// Everything the inner optimizer needs for one frozen coefficient source.
struct FrozenControlContext {
  FaceCoefficientTable table;
  std::vector<double> y0;
  TargetSet target;
  EnthalpyParams params;
  LinearSolverSettings lin;

  const SpatialGrid& grid() const { return table.grid; }
  const TimeGrid& times() const { return table.times; }
};

inline double penalty_of_terminal(const FrozenControlContext& ctx,
                                  std::span<const double> yT, double epsilon) {
  const auto v = violation_norms(ctx.grid(), ctx.target, yT, ctx.params.mu,
                                 ctx.params.latent_heat);
  return (v.below * v.below + v.above * v.above) / (2.0 * epsilon);
}

inline double cost_of_terminal(const FrozenControlContext& ctx,
                               const BoundaryControl& u,
                               std::span<const double> yT, double epsilon) {
  const double un = control_norm(ctx.grid(), u);
  return 0.5 * un * un + penalty_of_terminal(ctx, yT, epsilon);
}

/// Gradient at a known terminal state: u - p|_Sigma with p the backward
/// solve seeded by the penalty's terminal condition.
inline BoundaryControl gradient_of_terminal(const FrozenControlContext& ctx,
                                            const BoundaryControl& u,
                                            std::span<const double> yT,
                                            double epsilon) {
  TerminalPenaltyData data{epsilon, ctx.target, ctx.params.mu,
                           ctx.params.latent_heat};
  const auto pT = terminal_condition(yT, data);
  const auto p = solve_backward(ctx.table, pT, ctx.lin);
  const auto trace = adjoint_boundary_trace(p);
  BoundaryControl grad = u;
  for (size_t i = 0; i < grad.values.size(); ++i)
    grad.values[i] -= trace.values[i];
  return grad;
}

/// Exact line search along d: the derivative of J(u + a d) in a is
/// piecewise linear and nondecreasing; returns its root (0 when d is not a
/// descent direction). terminal/terminal_dir are the terminal slices of the
/// trajectories driven by u (with y0) and by d (with zero initial state).
inline double exact_line_search(const FrozenControlContext& ctx,
                                const BoundaryControl& u, const BoundaryControl& d,
                                std::span<const double> terminal,
                                std::span<const double> terminal_dir,
                                double epsilon) {
  const double c1 = control_inner(ctx.grid(), u, d);
  const double c2 = control_inner(ctx.grid(), d, d);
  const double vol = ctx.grid().cell_volume();
  const double mu = ctx.params.mu, rho = ctx.params.latent_heat;

  auto dphi = [&](double a) {
    double pen = 0.0;
    for (int i = 0; i < ctx.grid().cell_count(); ++i) {
      if (!ctx.target.mask[i]) continue;
      const double v = terminal[i] + a * terminal_dir[i];
      const double below = std::max(0.0, -(v + mu));
      const double above = std::max(0.0, v - rho - mu);
      pen += vol * terminal_dir[i] * (above - below);
    }
    return c1 + a * c2 + pen / epsilon;
  };

  if (dphi(0.0) >= 0.0) return 0.0;
  double hi = 1.0;
  int grow = 0;
  while (dphi(hi) < 0.0 && grow++ < 200) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dphi(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations on PenalizedProblem
// ---------------------------------------------------------------------------

namespace detail {

inline FrozenControlContext make_context(const PenalizedProblem& prob,
                                         const MollifierStencil& stencil,
                                         const LinearSolverSettings& lin,
                                         int threads) {
  prob.validate();
  return {build_face_coefficients(prob.z, prob.params, stencil, threads),
          prob.y0, prob.target, prob.params, lin};
}

}  // namespace detail

inline double penalty_functional(const BoundaryControl& u,
                                 const PenalizedProblem& prob,
                                 const MollifierStencil& stencil,
                                 const LinearSolverSettings& lin = {},
                                 int threads = 1) {
  const auto ctx = detail::make_context(prob, stencil, lin, threads);
  const auto y = solve_frozen_with_table(ctx.table, u, ctx.y0, lin);
  return detail::cost_of_terminal(ctx, u, y.slice(y.times.steps), prob.epsilon);
}

/// Gradient of the penalized functional in the L2(Sigma) sense: u - p|_Sigma.
inline BoundaryControl gradient(const BoundaryControl& u,
                                const PenalizedProblem& prob,
                                const MollifierStencil& stencil,
                                const LinearSolverSettings& lin = {},
                                int threads = 1) {
  const auto ctx = detail::make_context(prob, stencil, lin, threads);
  const auto y = solve_frozen_with_table(ctx.table, u, ctx.y0, lin);
  return detail::gradient_of_terminal(ctx, u, y.slice(y.times.steps), prob.epsilon);
}

struct InnerSolveResult {
  BoundaryControl u;
  SpaceTimeField y;
  double cost = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // false = stagnation, best iterate returned
  std::vector<double> cost_history;
};

namespace detail {

/// Polak-Ribiere conjugate gradients with exact line searches. Since the
/// state map is affine in u, each iteration needs one forward solve (for
/// the direction's terminal response) and one adjoint solve (for the new
/// gradient); the running terminal state is updated algebraically.
inline InnerSolveResult solve_penalized_ctx(const FrozenControlContext& ctx,
                                            double epsilon,
                                            const InnerCgSettings& cg,
                                            const BoundaryControl& u_init) {
  cg.validate();
  const SpatialGrid& g = ctx.grid();
  const int cells = g.cell_count();

  InnerSolveResult res;
  res.u = u_init;

  auto y = solve_frozen_with_table(ctx.table, res.u, ctx.y0, ctx.lin);
  std::vector<double> terminal(y.slice(y.times.steps).begin(),
                               y.slice(y.times.steps).end());

  BoundaryControl grad = gradient_of_terminal(ctx, res.u, terminal, epsilon);
  double gnorm = control_norm(g, grad);
  double gg = gnorm * gnorm;

  BoundaryControl dir = grad;
  for (auto& v : dir.values) v = -v;

  const std::vector<double> zero_y0(cells, 0.0);
  int stalls = 0;
  for (int it = 0; it < cg.max_iters; ++it) {
    res.grad_norm = gnorm;
    res.iterations = it;
    res.cost_history.push_back(cost_of_terminal(ctx, res.u, terminal, epsilon));
    if (gnorm <= cg.tol_grad * std::max(1.0, control_norm(g, res.u))) {
      res.converged = true;
      break;
    }

    // Restart on loss of descent.
    if (control_inner(g, dir, grad) >= 0.0) {
      dir = grad;
      for (auto& v : dir.values) v = -v;
    }

    const auto y_dir = solve_frozen_with_table(ctx.table, dir, zero_y0, ctx.lin);
    auto term_dir = y_dir.slice(y_dir.times.steps);
    const double alpha =
        exact_line_search(ctx, res.u, dir, terminal, term_dir, epsilon);
    if (alpha <= 0.0) {
      if (++stalls >= 2) break;
      dir = grad;
      for (auto& v : dir.values) v = -v;
      continue;
    }
    stalls = 0;

    for (size_t i = 0; i < res.u.values.size(); ++i)
      res.u.values[i] += alpha * dir.values[i];
    for (int i = 0; i < cells; ++i) terminal[i] += alpha * term_dir[i];

    BoundaryControl grad_new = gradient_of_terminal(ctx, res.u, terminal, epsilon);
    const double gnorm_new = control_norm(g, grad_new);
    double beta = 0.0;
    if (gg > 0.0) {
      double num = 0.0;
      BoundaryControl diff = grad_new;
      for (size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= grad.values[i];
      num = control_inner(g, grad_new, diff);
      beta = std::max(0.0, num / gg);
    }
    for (size_t i = 0; i < dir.values.size(); ++i)
      dir.values[i] = -grad_new.values[i] + beta * dir.values[i];
    grad = std::move(grad_new);
    gnorm = gnorm_new;
    gg = gnorm * gnorm;
  }

  // Re-solve at the returned control: guards the algebraic terminal update
  // and hands the caller a consistent trajectory.
  res.y = solve_frozen_with_table(ctx.table, res.u, ctx.y0, ctx.lin);
  res.cost = cost_of_terminal(ctx, res.u, res.y.slice(res.y.times.steps), epsilon);
  return res;
}

}  // namespace detail

/// Minimizes the penalized functional for a fixed epsilon.
inline InnerSolveResult solve_penalized(const PenalizedProblem& prob,
                                        const InnerCgSettings& cg,
                                        const MollifierStencil& stencil,
                                        const LinearSolverSettings& lin = {},
                                        int threads = 1,
                                        const std::optional<BoundaryControl>&
                                            warm_start = std::nullopt) {
  const auto ctx = detail::make_context(prob, stencil, lin, threads);
  const BoundaryControl u0 = warm_start
                                 ? *warm_start
                                 : BoundaryControl::zeros(prob.z.grid, prob.z.times);
  return detail::solve_penalized_ctx(ctx, prob.epsilon, cg, u0);
}

// ---------------------------------------------------------------------------
// Epsilon continuation
// ---------------------------------------------------------------------------

struct ContinuationStage {
  double epsilon = 0.0;
  double cost = 0.0;
  double control_norm = 0.0;
  double violation_below = 0.0;
  double violation_above = 0.0;
  int inner_iterations = 0;
  bool inner_converged = false;

  double violation_sum() const { return violation_below + violation_above; }
  double violation_max() const { return std::max(violation_below, violation_above); }
};

struct ContinuationResult {
  BoundaryControl u;
  SpaceTimeField y;
  std::vector<ContinuationStage> trace;
};

namespace detail {

inline ContinuationResult epsilon_continuation_ctx(
    const FrozenControlContext& ctx, const OuterLoopSettings& settings,
    const BoundaryControl& u_init) {
  const SpatialGrid& g = ctx.grid();
  const double viol_stop =
      settings.violation_tol_rel * std::sqrt(ctx.target.measure);

  ContinuationResult res;
  res.u = u_init;
  double eps = settings.eps_schedule.eps0;
  bool last_stage = eps <= settings.eps_schedule.floor;
  if (last_stage) eps = settings.eps_schedule.floor;

  while (true) {
    auto inner = solve_penalized_ctx(ctx, eps, settings.inner_cg, res.u);
    const auto v = violation_norms(g, ctx.target,
                                   inner.y.slice(inner.y.times.steps),
                                   ctx.params.mu, ctx.params.latent_heat);
    ContinuationStage stage;
    stage.epsilon = eps;
    stage.cost = inner.cost;
    stage.control_norm = control_norm(g, inner.u);
    stage.violation_below = v.below;
    stage.violation_above = v.above;
    stage.inner_iterations = inner.iterations;
    stage.inner_converged = inner.converged;
    res.trace.push_back(stage);
    res.u = std::move(inner.u);
    res.y = std::move(inner.y);

    if (last_stage) break;
    if (settings.violation_tol_rel > 0.0 && stage.violation_sum() <= viol_stop)
      break;
    eps *= settings.eps_schedule.factor;
    if (eps <= settings.eps_schedule.floor) {
      eps = settings.eps_schedule.floor;
      last_stage = true;
    }
  }
  return res;
}

}  // namespace detail

/// Solves the penalized problems along the epsilon schedule with warm
/// starts. prob.epsilon is ignored; the schedule in settings governs.
inline ContinuationResult epsilon_continuation(
    const PenalizedProblem& prob, const OuterLoopSettings& settings,
    const MollifierStencil& stencil, const LinearSolverSettings& lin = {},
    int threads = 1,
    const std::optional<BoundaryControl>& warm_start = std::nullopt) {
  settings.validate();
  const auto ctx = detail::make_context(prob, stencil, lin, threads);
  const BoundaryControl u0 = warm_start
                                 ? *warm_start
                                 : BoundaryControl::zeros(prob.z.grid, prob.z.times);
  return detail::epsilon_continuation_ctx(ctx, settings, u0);
}

// ---------------------------------------------------------------------------
// Outer fixed-point loop
// ---------------------------------------------------------------------------

struct OuterIterationTrace {
  int iteration = 0;
  double z_change = 0.0;         // relative L2(Q) movement of the iterate
  double coverage_frozen = 0.0;  // coverage of the frozen-system trajectory
  double control_norm = 0.0;
  double violation_sum = 0.0;
  int continuation_stages = 0;
};

struct OuterResult {
  BoundaryControl u;
  SpaceTimeField y;  // fully nonlinear trajectory under the returned control
  bool success = false;
  bool frozen_converged = false;
  int outer_iterations = 0;
  double coverage_frozen = 0.0;
  double coverage_nonlinear = 0.0;
  std::vector<OuterIterationTrace> trace;
  std::vector<ContinuationStage> last_continuation;
};

/// Realizes the coefficient-matching loop: for the current source z, find a
/// control steering the frozen system's terminal state into the mushy band
/// on the target, then mix the controlled trajectory back into z. Declares
/// convergence on z-stagnation plus full frozen coverage, and certifies the
/// verdict with a fully nonlinear re-solve under the found control.
inline OuterResult outer_fixed_point(
    const SpatialGrid& grid, const TimeGrid& times, std::span<const double> y0,
    const TargetSet& target, const EnthalpyParams& params,
    const OuterLoopSettings& settings, const PicardSettings& picard,
    const MollifierStencil& stencil, const LinearSolverSettings& lin = {},
    int threads = 1) {
  settings.validate();
  params.validate();

  SpaceTimeField z = SpaceTimeField::constant_in_time(grid, times, y0);
  OuterResult res;
  res.u = BoundaryControl::zeros(grid, times);

  double relaxation = settings.relaxation;
  const double band_lo = -params.mu;
  const double band_hi = params.latent_heat + params.mu;

  for (int k = 0; k < settings.max_outer; ++k) {
    detail::FrozenControlContext ctx{
        build_face_coefficients(z, params, stencil, threads),
        std::vector<double>(y0.begin(), y0.end()), target, params, lin};
    auto cont = detail::epsilon_continuation_ctx(ctx, settings, res.u);

    const auto mask = mushy_set(cont.y, times.steps, band_lo, band_hi);
    const double cov = coverage(grid, target, mask);

    SpaceTimeField z_new = z;
    for (size_t i = 0; i < z.values.size(); ++i)
      z_new.values[i] += relaxation * (cont.y.values[i] - z.values[i]);
    SpaceTimeField diff = z_new;
    for (size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= z.values[i];
    const double change = l2_norm_spacetime(diff) /
                          std::max(l2_norm_spacetime(z_new), 1e-300);

    OuterIterationTrace it;
    it.iteration = k;
    it.z_change = change;
    it.coverage_frozen = cov;
    it.control_norm = control_norm(grid, cont.u);
    it.violation_sum = cont.trace.back().violation_sum();
    it.continuation_stages = static_cast<int>(cont.trace.size());
    res.trace.push_back(it);

    z = std::move(z_new);
    res.u = std::move(cont.u);
    res.coverage_frozen = cov;
    res.last_continuation = std::move(cont.trace);
    res.outer_iterations = k + 1;

    if (change <= settings.tol_outer && cov >= 1.0) {
      res.frozen_converged = true;
      break;
    }
    const size_t h = res.trace.size();
    if (h >= 3 && res.trace[h - 1].z_change > res.trace[h - 2].z_change &&
        res.trace[h - 2].z_change > res.trace[h - 3].z_change)
      relaxation = std::max(0.5 * relaxation, 1.0 / 16.0);
  }

  // Final verdict on the fully nonlinear system under the found control.
  auto nonlinear =
      solve_nonlinear(grid, times, res.u, y0, params, picard, stencil, lin, threads);
  res.y = std::move(nonlinear.y);
  const auto mask = mushy_set(res.y, times.steps, band_lo, band_hi);
  res.coverage_nonlinear = coverage(grid, target, mask);
  res.success = res.frozen_converged && res.coverage_nonlinear >= 1.0;
  return res;
}

}  // namespace mushy
