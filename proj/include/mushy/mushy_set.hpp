#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mushy/errors.hpp"
#include "mushy/grid.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Target sets, mushy masks, coverage and Hausdorff distance. Set membership
// is decided at cell centers; measures are cell counts times cell volume.
// ---------------------------------------------------------------------------

struct TargetSet {
  std::vector<std::uint8_t> mask;  // one flag per cell
  double measure = 0.0;

  static TargetSet from_mask(const SpatialGrid& g, std::vector<std::uint8_t> m) {
    if (static_cast<int>(m.size()) != g.cell_count())
      throw validation_error("target: mask size does not match the grid");
    TargetSet t;
    t.mask = std::move(m);
    long count = 0;
    for (auto v : t.mask) count += (v != 0);
    t.measure = count * g.cell_volume();
    if (!(t.measure > 0.0))
      throw validation_error("target: target set must have positive measure");
    return t;
  }

  /// Builds the target from axis-aligned boxes [lo1,hi1] ([lo2,hi2] in 2D);
  /// a cell belongs when its center does.
  static TargetSet from_boxes(const SpatialGrid& g,
                              const std::vector<std::array<double, 4>>& boxes) {
    std::vector<std::uint8_t> m(g.cell_count(), 0);
    for (int i = 0; i < g.cell_count(); ++i) {
      const auto c = g.cell_center(i);
      for (const auto& b : boxes) {
        const bool in_x = c[0] >= b[0] && c[0] <= b[1];
        const bool in_y = g.dimension == 1 || (c[1] >= b[2] && c[1] <= b[3]);
        if (in_x && in_y) {
          m[i] = 1;
          break;
        }
      }
    }
    return from_mask(g, std::move(m));
  }
};

struct MushyMask {
  int time_index = 0;
  std::vector<std::uint8_t> mask;

  long count() const {
    long c = 0;
    for (auto v : mask) c += (v != 0);
    return c;
  }
};

/// Cells whose state at time level t lies inside [lo, hi]. The band is a
/// parameter: (-mu, rho+mu), (-2mu, rho+2mu) and (-2 lambda^(1/4),
/// rho + 2 lambda^(1/4)) are the variants used by the experiments.
inline MushyMask mushy_set(const SpaceTimeField& y, int t_index, double lo,
                           double hi) {
  if (t_index < 0 || t_index > y.times.steps)
    throw validation_error("mushy_set: time index outside the grid");
  MushyMask m;
  m.time_index = t_index;
  m.mask.resize(y.grid.cell_count());
  auto sl = y.slice(t_index);
  for (int i = 0; i < y.grid.cell_count(); ++i)
    m.mask[i] = (sl[i] >= lo && sl[i] <= hi) ? 1 : 0;
  return m;
}

/// measure(target ∩ mask) / measure(target); equals 1 exactly when every
/// target cell is mushy.
inline double coverage(const SpatialGrid& g, const TargetSet& target,
                       const MushyMask& m) {
  if (target.mask.size() != m.mask.size())
    throw validation_error("coverage: mask size mismatch");
  long hit = 0;
  for (size_t i = 0; i < target.mask.size(); ++i)
    hit += (target.mask[i] && m.mask[i]);
  return hit * g.cell_volume() / target.measure;
}

/// Hausdorff distance between two cell masks via cell-center distances.
/// Empty vs nonempty yields +infinity; both empty is undefined and throws.
inline double hausdorff_distance(const SpatialGrid& g, const MushyMask& a,
                                 const MushyMask& b) {
  std::vector<int> ca, cb;
  for (size_t i = 0; i < a.mask.size(); ++i) if (a.mask[i]) ca.push_back(int(i));
  for (size_t i = 0; i < b.mask.size(); ++i) if (b.mask[i]) cb.push_back(int(i));
  if (ca.empty() && cb.empty())
    throw validation_error("hausdorff_distance: both masks are empty");
  if (ca.empty() || cb.empty()) return std::numeric_limits<double>::infinity();

  auto directed = [&](const std::vector<int>& from, const std::vector<int>& to) {
    double worst = 0.0;
    for (int i : from) {
      const auto ci = g.cell_center(i);
      double best = std::numeric_limits<double>::infinity();
      for (int j : to) {
        const auto cj = g.cell_center(j);
        const double dx = ci[0] - cj[0], dy = ci[1] - cj[1];
        best = std::min(best, dx * dx + dy * dy);
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(ca, cb), directed(cb, ca));
}

/// Max over random interior space-time pairs of
/// |y(t,x) - y(s,xi)| / (|t-s|^(1/2) + |x-xi|^(1/2)).
inline double holder_quotient(const SpaceTimeField& y, double interior_margin,
                              int sample_count, std::uint64_t seed) {
  const SpatialGrid& g = y.grid;
  std::vector<int> interior;
  for (int i = 0; i < g.cell_count(); ++i)
    if (g.distance_to_boundary(i) >= interior_margin) interior.push_back(i);
  if (interior.empty())
    throw validation_error("holder_quotient: no interior cells at this margin");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick_cell(0, interior.size() - 1);
  std::uniform_int_distribution<int> pick_level(0, y.times.steps);

  double worst = 0.0;
  for (int s = 0; s < sample_count; ++s) {
    const int i = interior[pick_cell(rng)], j = interior[pick_cell(rng)];
    const int n = pick_level(rng), m = pick_level(rng);
    if (i == j && n == m) continue;
    const auto ci = g.cell_center(i), cj = g.cell_center(j);
    const double dx = std::hypot(ci[0] - cj[0], ci[1] - cj[1]);
    const double dtb = std::abs(y.times.time_of(n) - y.times.time_of(m));
    const double denom = std::sqrt(dtb) + std::sqrt(dx);
    worst = std::max(worst, std::abs(y.at(n, i) - y.at(m, j)) / denom);
  }
  return worst;
}

}  // namespace mushy
