#pragma once

#include <span>
#include <thread>
#include <vector>

#include "mushy/enthalpy.hpp"
#include "mushy/errors.hpp"
#include "mushy/grid.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Per-step interior-face diffusion coefficients, frozen from an iterate z.
//
// The coefficient of step n -> n+1 on a face is the arithmetic mean of the
// mollified coefficient at the two adjacent cell centers, evaluated at the
// step's start time t^n. The table is shared between the forward step and
// its adjoint, which is what makes the backward solve the exact transpose.
// ---------------------------------------------------------------------------

struct FaceCoefficientTable {
  SpatialGrid grid;
  TimeGrid times;
  std::vector<double> values;  // step-major: values[step*faces + face]
  bool time_window_clamped = false;  // mollifier window hit t+lambda > T

  double at(int step, int face) const {
    return values[static_cast<size_t>(step) * grid.interior_face_count() + face];
  }
  std::span<const double> step_slice(int n) const {
    const int m = grid.interior_face_count();
    return {values.data() + static_cast<size_t>(n) * m, static_cast<size_t>(m)};
  }
};

/// Builds the face-coefficient table from a frozen iterate. Cell values are
/// independent, so the sweep may be split across threads without changing
/// any summation order (bitwise reproducible for any thread count).
inline FaceCoefficientTable build_face_coefficients(
    const SpaceTimeField& z, const EnthalpyParams& params,
    const MollifierStencil& stencil, int threads = 1) {
  const SpatialGrid& g = z.grid;
  const int cells = g.cell_count();
  const int faces = g.interior_face_count();
  const int steps = z.times.steps;

  FaceCoefficientTable table;
  table.grid = g;
  table.times = z.times;
  table.values.resize(static_cast<size_t>(steps) * faces);
  table.time_window_clamped =
      z.times.time_of(steps - 1) + params.lambda > z.times.horizon;

  std::vector<double> cell_coeff(static_cast<size_t>(steps) * cells);
  auto worker = [&](int begin, int end) {
    for (int n = begin; n < end; ++n) {
      const double t = z.times.time_of(n);
      for (int i = 0; i < cells; ++i)
        cell_coeff[static_cast<size_t>(n) * cells + i] =
            mollified_coefficient(z, t, g.cell_center(i), params, stencil);
    }
  };
  if (threads <= 1 || steps < 2) {
    worker(0, steps);
  } else {
    const int nt = std::min(threads, steps);
    std::vector<std::thread> pool;
    for (int k = 0; k < nt; ++k) {
      const int b = steps * k / nt, e = steps * (k + 1) / nt;
      pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  const double lo = params.lambda_alpha() * (1.0 - 1e-12);
  const double hi = params.k_star() * (1.0 + 1e-12);
  for (int n = 0; n < steps; ++n)
    for (int f = 0; f < faces; ++f) {
      const auto face = g.interior_face(f);
      const double c =
          0.5 * (cell_coeff[static_cast<size_t>(n) * cells + face.cell_lo] +
                 cell_coeff[static_cast<size_t>(n) * cells + face.cell_hi]);
      if (!(c >= lo && c <= hi))
        throw invariant_violation(
            "face coefficient escaped the band [lambda^alpha, k*]");
      table.values[static_cast<size_t>(n) * faces + f] = c;
    }
  return table;
}

/// Constant-coefficient table (test instrumentation and pure-phase runs).
inline FaceCoefficientTable constant_coefficient_table(const SpatialGrid& g,
                                                       const TimeGrid& t,
                                                       double k) {
  FaceCoefficientTable table;
  table.grid = g;
  table.times = t;
  table.values.assign(static_cast<size_t>(t.steps) * g.interior_face_count(), k);
  return table;
}

}  // namespace mushy
