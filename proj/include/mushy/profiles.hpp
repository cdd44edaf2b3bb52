#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mushy/errors.hpp"
#include "mushy/grid.hpp"

namespace mushy {

// Named initial profiles; enough to reproduce the desk-scale experiments
// without external data. 2D variants vary along x (cosine bump varies along
// both axes).

inline std::vector<double> profile_constant(const SpatialGrid& g, double value) {
  return std::vector<double>(g.cell_count(), value);
}

inline std::vector<double> profile_linear_ramp(const SpatialGrid& g, double from,
                                               double to) {
  std::vector<double> f(g.cell_count());
  for (int i = 0; i < g.cell_count(); ++i)
    f[i] = from + (to - from) * g.cell_center(i)[0] / g.extent[0];
  return f;
}

/// Solid on the left, liquid on the right, linear mushy transition of the
/// given width centered at x_step.
inline std::vector<double> profile_two_phase_step(const SpatialGrid& g,
                                                  double y_solid, double y_liquid,
                                                  double x_step, double width) {
  if (!(width > 0.0))
    throw validation_error("two_phase_step: width must be > 0");
  std::vector<double> f(g.cell_count());
  for (int i = 0; i < g.cell_count(); ++i) {
    const double x = g.cell_center(i)[0];
    if (x <= x_step - width / 2) {
      f[i] = y_solid;
    } else if (x >= x_step + width / 2) {
      f[i] = y_liquid;
    } else {
      const double s = (x - (x_step - width / 2)) / width;
      f[i] = y_solid + (y_liquid - y_solid) * s;
    }
  }
  return f;
}

/// base + amplitude * cos(pi x / Lx) (times cos(pi y / Ly) in 2D); the
/// natural Neumann eigenmode used by the manufactured-solution studies.
inline std::vector<double> profile_cosine_bump(const SpatialGrid& g, double base,
                                               double amplitude) {
  std::vector<double> f(g.cell_count());
  for (int i = 0; i < g.cell_count(); ++i) {
    const auto c = g.cell_center(i);
    double v = std::cos(M_PI * c[0] / g.extent[0]);
    if (g.dimension == 2) v *= std::cos(M_PI * c[1] / g.extent[1]);
    f[i] = base + amplitude * v;
  }
  return f;
}

}  // namespace mushy
