#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mushy/errors.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Structured cell-centered grids on [0,L1] ([0,L1]x[0,L2] in 2D).
//
// Cells are enumerated row-major (ix + nx*iy). States live at cell centers;
// Neumann data lives on boundary faces. Boundary faces are enumerated in a
// fixed order: axis-0 low side, axis-0 high side, then (2D) axis-1 low,
// axis-1 high, each swept over the transverse cell index.
// ---------------------------------------------------------------------------

struct SpatialGrid {
  int dimension = 1;
  std::array<double, 2> extent = {1.0, 1.0};
  std::array<int, 2> cells = {4, 1};

  static SpatialGrid line(double length, int n) {
    SpatialGrid g;
    g.dimension = 1;
    g.extent = {length, 1.0};
    g.cells = {n, 1};
    g.validate();
    return g;
  }

  static SpatialGrid box(double lx, double ly, int nx, int ny) {
    SpatialGrid g;
    g.dimension = 2;
    g.extent = {lx, ly};
    g.cells = {nx, ny};
    g.validate();
    return g;
  }

  void validate() const {
    if (dimension != 1 && dimension != 2)
      throw validation_error("grid: dimension must be 1 or 2");
    for (int a = 0; a < dimension; ++a) {
      if (!(extent[a] > 0.0))
        throw validation_error("grid: extent must be positive");
      if (cells[a] < 4)
        throw validation_error("grid: cells_per_axis must be >= 4");
    }
    if (dimension == 1 && cells[1] != 1)
      throw validation_error("grid: 1D grid must have a single cell along axis 1");
  }

  double spacing(int axis) const { return extent[axis] / cells[axis]; }
  int cell_count() const { return cells[0] * cells[1]; }
  double cell_volume() const {
    return dimension == 1 ? spacing(0) : spacing(0) * spacing(1);
  }
  double domain_measure() const { return cell_volume() * cell_count(); }

  int index(int ix, int iy = 0) const { return ix + cells[0] * iy; }
  int ix_of(int idx) const { return idx % cells[0]; }
  int iy_of(int idx) const { return idx / cells[0]; }

  std::array<double, 2> cell_center(int idx) const {
    return {(ix_of(idx) + 0.5) * spacing(0),
            dimension == 2 ? (iy_of(idx) + 0.5) * spacing(1) : 0.0};
  }

  /// Distance from a cell center to the nearest boundary point of the box.
  double distance_to_boundary(int idx) const {
    auto c = cell_center(idx);
    double d = std::min(c[0], extent[0] - c[0]);
    if (dimension == 2) d = std::min({d, c[1], extent[1] - c[1]});
    return d;
  }

  // --- boundary faces -------------------------------------------------------

  struct BoundaryFace {
    int cell;                      // adjacent cell index
    int axis;                      // normal axis
    int side;                      // 0 = low, 1 = high
    double area;                   // face measure (1 in 1D)
    std::array<double, 2> center;  // face midpoint
  };

  int boundary_face_count() const {
    return dimension == 1 ? 2 : 2 * (cells[0] + cells[1]);
  }

  BoundaryFace boundary_face(int f) const {
    BoundaryFace bf{};
    if (dimension == 1) {
      bf.axis = 0;
      bf.side = f;
      bf.cell = (f == 0) ? 0 : cells[0] - 1;
      bf.area = 1.0;
      bf.center = {f == 0 ? 0.0 : extent[0], 0.0};
      return bf;
    }
    const int nx = cells[0], ny = cells[1];
    if (f < ny) {  // axis-0 low
      bf = {index(0, f), 0, 0, spacing(1), {0.0, (f + 0.5) * spacing(1)}};
    } else if (f < 2 * ny) {  // axis-0 high
      int iy = f - ny;
      bf = {index(nx - 1, iy), 0, 1, spacing(1), {extent[0], (iy + 0.5) * spacing(1)}};
    } else if (f < 2 * ny + nx) {  // axis-1 low
      int ix = f - 2 * ny;
      bf = {index(ix, 0), 1, 0, spacing(0), {(ix + 0.5) * spacing(0), 0.0}};
    } else {  // axis-1 high
      int ix = f - 2 * ny - nx;
      bf = {index(ix, ny - 1), 1, 1, spacing(0), {(ix + 0.5) * spacing(0), extent[1]}};
    }
    return bf;
  }

  /// Total boundary measure (2 points in 1D with unit face measure).
  double boundary_measure() const {
    double s = 0.0;
    for (int f = 0; f < boundary_face_count(); ++f) s += boundary_face(f).area;
    return s;
  }

  // --- interior faces -------------------------------------------------------
  //
  // Axis-0 faces first ((nx-1)*ny of them), then axis-1 faces (nx*(ny-1)).
  // Face k on axis 0 joins cells (ix,iy) and (ix+1,iy) with
  // k = ix + (nx-1)*iy; analogously on axis 1.

  int interior_face_count() const {
    const int nx = cells[0], ny = cells[1];
    return (nx - 1) * ny + (dimension == 2 ? nx * (ny - 1) : 0);
  }

  struct InteriorFace {
    int cell_lo;
    int cell_hi;
    double area;
    double distance;  // center-to-center distance
  };

  InteriorFace interior_face(int k) const {
    const int nx = cells[0], ny = cells[1];
    const int n0 = (nx - 1) * ny;
    if (k < n0) {
      int ix = k % (nx - 1), iy = k / (nx - 1);
      return {index(ix, iy), index(ix + 1, iy),
              dimension == 2 ? spacing(1) : 1.0, spacing(0)};
    }
    int k1 = k - n0;
    int ix = k1 % nx, iy = k1 / nx;
    return {index(ix, iy), index(ix, iy + 1), spacing(0), spacing(1)};
  }

  bool same_layout(const SpatialGrid& o) const {
    return dimension == o.dimension && cells == o.cells && extent == o.extent;
  }
};

struct TimeGrid {
  double horizon = 1.0;
  int steps = 2;

  TimeGrid() = default;
  TimeGrid(double horizon, int steps) : horizon(horizon), steps(steps) { validate(); }

  void validate() const {
    if (!(horizon > 0.0)) throw validation_error("time grid: horizon must be positive");
    if (steps < 2) throw validation_error("time grid: steps must be >= 2");
  }

  double dt() const { return horizon / steps; }
  int levels() const { return steps + 1; }
  double time_of(int level) const { return level * dt(); }

  bool operator==(const TimeGrid& o) const {
    return horizon == o.horizon && steps == o.steps;
  }
};

// ---------------------------------------------------------------------------
// SpaceTimeField: one scalar per (time level, cell), levels 0..steps.
// ---------------------------------------------------------------------------

struct SpaceTimeField {
  SpatialGrid grid;
  TimeGrid times;
  std::vector<double> values;  // level-major: values[level*cells + cell]

  SpaceTimeField() = default;
  SpaceTimeField(const SpatialGrid& g, const TimeGrid& t, double fill = 0.0)
      : grid(g), times(t),
        values(static_cast<size_t>(t.levels()) * g.cell_count(), fill) {}

  double& at(int level, int cell) {
    return values[static_cast<size_t>(level) * grid.cell_count() + cell];
  }
  double at(int level, int cell) const {
    return values[static_cast<size_t>(level) * grid.cell_count() + cell];
  }

  std::span<double> slice(int level) {
    return {values.data() + static_cast<size_t>(level) * grid.cell_count(),
            static_cast<size_t>(grid.cell_count())};
  }
  std::span<const double> slice(int level) const {
    return {values.data() + static_cast<size_t>(level) * grid.cell_count(),
            static_cast<size_t>(grid.cell_count())};
  }

  /// Field constant in time equal to the given initial slice.
  static SpaceTimeField constant_in_time(const SpatialGrid& g, const TimeGrid& t,
                                         std::span<const double> slice0) {
    SpaceTimeField f(g, t);
    for (int n = 0; n < t.levels(); ++n)
      std::copy(slice0.begin(), slice0.end(), f.slice(n).begin());
    return f;
  }
};

// ---------------------------------------------------------------------------
// BoundaryControl: Neumann flux per (time slot, boundary face). Slot n holds
// the flux applied during step n -> n+1 (the implicit level t^{n+1}), which
// is the sampling the fully implicit scheme and its discrete adjoint share.
// ---------------------------------------------------------------------------

struct BoundaryControl {
  TimeGrid times;
  int face_count = 0;
  std::vector<double> values;  // slot-major: values[slot*faces + face]

  BoundaryControl() = default;
  BoundaryControl(const TimeGrid& t, int faces, double fill = 0.0)
      : times(t), face_count(faces),
        values(static_cast<size_t>(t.steps) * faces, fill) {}

  static BoundaryControl zeros(const SpatialGrid& g, const TimeGrid& t) {
    return BoundaryControl(t, g.boundary_face_count());
  }

  double& at(int slot, int face) {
    return values[static_cast<size_t>(slot) * face_count + face];
  }
  double at(int slot, int face) const {
    return values[static_cast<size_t>(slot) * face_count + face];
  }

  std::span<double> slot(int n) {
    return {values.data() + static_cast<size_t>(n) * face_count,
            static_cast<size_t>(face_count)};
  }
  std::span<const double> slot(int n) const {
    return {values.data() + static_cast<size_t>(n) * face_count,
            static_cast<size_t>(face_count)};
  }
};

// ---------------------------------------------------------------------------
// Norms and inner products
// ---------------------------------------------------------------------------

/// Discrete L2(Omega) norm of one time slice.
inline double l2_norm_space(const SpatialGrid& g, std::span<const double> f) {
  double s = 0.0;
  for (double v : f) s += v * v;
  return std::sqrt(g.cell_volume() * s);
}

inline double l2_inner_space(const SpatialGrid& g, std::span<const double> a,
                             std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return g.cell_volume() * s;
}

namespace detail {

/// Cell gradient along one axis: central differences inside, one-sided
/// second-order at the boundary. Diagnostic use only (never in the solver
/// stencil).
inline double cell_gradient(const SpatialGrid& g, std::span<const double> f,
                            int idx, int axis) {
  const double h = g.spacing(axis);
  const int n = g.cells[axis];
  const int i = axis == 0 ? g.ix_of(idx) : g.iy_of(idx);
  const int stride = axis == 0 ? 1 : g.cells[0];
  if (i == 0)
    return (-3.0 * f[idx] + 4.0 * f[idx + stride] - f[idx + 2 * stride]) / (2.0 * h);
  if (i == n - 1)
    return (3.0 * f[idx] - 4.0 * f[idx - stride] + f[idx - 2 * stride]) / (2.0 * h);
  return (f[idx + stride] - f[idx - stride]) / (2.0 * h);
}

}  // namespace detail

/// Discrete H1 norm (|f|_2^2 + |grad f|_2^2)^(1/2) of one time slice.
inline double v_norm(const SpatialGrid& g, std::span<const double> f) {
  double s = 0.0;
  for (int i = 0; i < g.cell_count(); ++i) {
    double gsq = 0.0;
    for (int a = 0; a < g.dimension; ++a) {
      double d = detail::cell_gradient(g, f, i, a);
      gsq += d * d;
    }
    s += f[i] * f[i] + gsq;
  }
  return std::sqrt(g.cell_volume() * s);
}

/// Trapezoidal-in-time L2(Q) norm of a space-time field.
inline double l2_norm_spacetime(const SpaceTimeField& f) {
  const int N = f.times.steps;
  double s = 0.0;
  for (int n = 0; n <= N; ++n) {
    double w = (n == 0 || n == N) ? 0.5 : 1.0;
    auto sl = f.slice(n);
    double t = 0.0;
    for (double v : sl) t += v * v;
    s += w * t;
  }
  return std::sqrt(s * f.grid.cell_volume() * f.times.dt());
}

/// L2(Sigma) inner product of two boundary controls on the same grid.
inline double control_inner(const SpatialGrid& g, const BoundaryControl& a,
                            const BoundaryControl& b) {
  if (a.face_count != b.face_count || !(a.times == b.times))
    throw validation_error("control_inner: mismatched control layouts");
  const double dt = a.times.dt();
  double s = 0.0;
  for (int n = 0; n < a.times.steps; ++n)
    for (int f = 0; f < a.face_count; ++f)
      s += g.boundary_face(f).area * a.at(n, f) * b.at(n, f);
  return dt * s;
}

inline double control_norm(const SpatialGrid& g, const BoundaryControl& u) {
  return std::sqrt(control_inner(g, u, u));
}

/// Boundary integral of u(t) against a face trace w at one time slot:
/// sum over faces of area * u * w.
inline double boundary_integral(const SpatialGrid& g, const BoundaryControl& u,
                                std::span<const double> w, int slot) {
  if (static_cast<int>(w.size()) != u.face_count ||
      u.face_count != g.boundary_face_count())
    throw validation_error("boundary_integral: mismatched grids");
  double s = 0.0;
  for (int f = 0; f < u.face_count; ++f)
    s += g.boundary_face(f).area * u.at(slot, f) * w[f];
  return s;
}

// ---------------------------------------------------------------------------
// Space-time evaluation with clamped extension
// ---------------------------------------------------------------------------

namespace detail {

struct AxisWeights {
  int i0;
  int i1;
  double w1;  // weight of i1; value = (1-w1)*f[i0] + w1*f[i1]
};

/// Linear interpolation weights along one axis of cell centers, clamped to
/// the nearest center outside [h/2, L-h/2].
inline AxisWeights axis_weights(double x, double h, int n) {
  double u = x / h - 0.5;
  if (u <= 0.0) return {0, 0, 0.0};
  if (u >= n - 1) return {n - 1, n - 1, 0.0};
  int i0 = static_cast<int>(u);
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, u - i0};
}

/// Multilinear interpolation of one slice at point x, nearest-point beyond
/// the cell-center hull.
inline double interp_slice(const SpatialGrid& g, std::span<const double> f,
                           const std::array<double, 2>& x) {
  auto wx = axis_weights(x[0], g.spacing(0), g.cells[0]);
  if (g.dimension == 1) return (1.0 - wx.w1) * f[wx.i0] + wx.w1 * f[wx.i1];
  auto wy = axis_weights(x[1], g.spacing(1), g.cells[1]);
  const double f00 = f[g.index(wx.i0, wy.i0)], f10 = f[g.index(wx.i1, wy.i0)];
  const double f01 = f[g.index(wx.i0, wy.i1)], f11 = f[g.index(wx.i1, wy.i1)];
  const double a = (1.0 - wx.w1) * f00 + wx.w1 * f10;
  const double b = (1.0 - wx.w1) * f01 + wx.w1 * f11;
  return (1.0 - wy.w1) * a + wy.w1 * b;
}

}  // namespace detail

/// Evaluate a space-time field at an arbitrary (s, x): multilinear inside
/// [0,T] x Omega, constant-in-time beyond T (and before 0), nearest-point
/// beyond the spatial hull of cell centers.
inline double extend_field(const SpaceTimeField& z, double s,
                           const std::array<double, 2>& x) {
  const double T = z.times.horizon;
  const double dt = z.times.dt();
  double u = std::clamp(s, 0.0, T) / dt;
  int n0 = static_cast<int>(u);
  if (n0 > z.times.steps - 1) n0 = z.times.steps - 1;
  const double w = u - n0;
  const double a = detail::interp_slice(z.grid, z.slice(n0), x);
  if (w <= 0.0) return a;
  const double b = detail::interp_slice(z.grid, z.slice(n0 + 1), x);
  return (1.0 - w) * a + w * b;
}

}  // namespace mushy
