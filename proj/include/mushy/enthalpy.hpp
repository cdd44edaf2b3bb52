#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mushy/errors.hpp"
#include "mushy/grid.hpp"
#include "mushy/quadrature.hpp"

namespace mushy {

// ---------------------------------------------------------------------------
// Two-phase enthalpy model with mushy transition band.
//
// The state variable is an enthalpy-like quantity r. Temperature is a
// piecewise-linear function of r with a flat segment of width latent_heat
// (the mushy plateau). The effective conductivity is smoothed over a band of
// half-width lambda^alpha around the plateau and takes the small value
// lambda^alpha on the plateau itself.
// ---------------------------------------------------------------------------

struct EnthalpyParams {
  double k_solid = 2.0;     // conductivity below the plateau
  double k_liquid = 1.0;    // conductivity above the plateau
  double latent_heat = 1.0; // plateau width (> 0)
  double lambda = 1e-4;     // regularization scale (> 0, small)
  double alpha = 0.25;      // band exponent, in (0,1)
  double mu = 0.05;         // mushy tolerance used by set extraction (> 0)

  double lambda_alpha() const { return std::pow(lambda, alpha); }
  double k_star() const { return std::max(k_solid, k_liquid); }

  void validate() const {
    if (!(k_solid > 0.0)) throw validation_error("physics: k1 must be > 0");
    if (!(k_liquid > 0.0)) throw validation_error("physics: k2 must be > 0");
    if (!(latent_heat > 0.0)) throw validation_error("physics: rho must be > 0");
    if (!(lambda > 0.0)) throw validation_error("physics: lambda must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw validation_error("physics: alpha must lie in (0,1)");
    if (!(mu > 0.0)) throw validation_error("physics: mu must be > 0");
    if (!(k_star() - lambda_alpha() > 0.0))
      throw validation_error("physics: lambda^alpha must be < max(k1,k2)");
    // The conductivity band [lambda^alpha, k*] requires the transition arcs
    // to stay above lambda^alpha, hence both endpoints must.
    if (!(lambda_alpha() <= std::min(k_solid, k_liquid)))
      throw validation_error("physics: lambda^alpha must not exceed min(k1,k2)");
  }
};

/// Piecewise-linear temperature as a function of enthalpy: k1*r below 0,
/// flat 0 on [0, latent_heat), k2*(r - latent_heat) above.
inline double enthalpy_to_temperature(double r, const EnthalpyParams& p) {
  if (r < 0.0) return p.k_solid * r;
  if (r < p.latent_heat) return 0.0;
  return p.k_liquid * (r - p.latent_heat);
}

namespace detail {
inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }
}

/// C1 conductivity profile on the transition band [-la, rho+la],
/// la = lambda^alpha: cubic arcs with zero end slopes joining k1 down to the
/// plateau value la and back up to k2, flat la on [0, rho]. Throws
/// std::domain_error outside the band.
inline double transition_conductivity(double r, const EnthalpyParams& p) {
  const double la = p.lambda_alpha();
  const double rho = p.latent_heat;
  if (r < -la || r > rho + la)
    throw std::domain_error("transition_conductivity: argument outside the band");
  if (r < 0.0) return p.k_solid + (la - p.k_solid) * detail::smoothstep((r + la) / la);
  if (r <= rho) return la;
  return la + (p.k_liquid - la) * detail::smoothstep((r - rho) / la);
}

/// Globally C1 smoothed conductivity: k1 below the band, k2 above, the
/// transition profile inside. Range is contained in [lambda^alpha, k*].
inline double smoothed_conductivity(double r, const EnthalpyParams& p) {
  const double la = p.lambda_alpha();
  if (r < -la) return p.k_solid;
  if (r > p.latent_heat + la) return p.k_liquid;
  return transition_conductivity(r, p);
}

// ---------------------------------------------------------------------------
// Mollifier
// ---------------------------------------------------------------------------

struct MollifierSpec {
  int dimension = 1;
  double normalization = 0.0;  // C with integral of C*exp(-1/(1-|xi|^2)) = 1
  int quadrature_order = 8;    // Gauss-Legendre order per axis for stencils
};

namespace detail {

inline double bump_unnormalized(double rr) {  // rr = |xi|^2
  return rr < 1.0 ? std::exp(-1.0 / (1.0 - rr)) : 0.0;
}

/// Integral of the unnormalized bump over the unit ball, dense composite
/// quadrature (accurate well beyond 1e-12).
inline double bump_integral(int dimension) {
  if (dimension == 1)
    return composite_gl([](double x) { return bump_unnormalized(x * x); },
                        -1.0, 1.0, 16, 64);
  // 2D: radial form, 2*pi * int_0^1 r * bump(r^2) dr
  return 2.0 * M_PI *
         composite_gl([](double r) { return r * bump_unnormalized(r * r); },
                      0.0, 1.0, 16, 64);
}

}  // namespace detail

inline MollifierSpec make_mollifier_spec(int dimension, int quadrature_order = 8) {
  if (dimension != 1 && dimension != 2)
    throw validation_error("mollifier: dimension must be 1 or 2");
  if (quadrature_order < 2)
    throw validation_error("mollifier: quadrature_order must be >= 2");
  MollifierSpec spec;
  spec.dimension = dimension;
  spec.quadrature_order = quadrature_order;
  spec.normalization = 1.0 / detail::bump_integral(dimension);
  return spec;
}

/// Pointwise mollifier value: C * exp(-1/(1-|xi|^2)) inside the unit ball,
/// 0 outside.
inline double mollifier_weight(const std::array<double, 2>& xi,
                               const MollifierSpec& spec) {
  const double rr = spec.dimension == 1 ? xi[0] * xi[0]
                                        : xi[0] * xi[0] + xi[1] * xi[1];
  return spec.normalization * detail::bump_unnormalized(rr);
}

// ---------------------------------------------------------------------------
// Mollified space-time coefficient
// ---------------------------------------------------------------------------

/// Precomputed spatial quadrature for the mollified coefficient. The
/// discrete weights are renormalized to sum to exactly 1 so every evaluation
/// is a strict convex average of conductivity samples; this is what pins the
/// coefficient inside [lambda^alpha, k*] regardless of quadrature order.
struct MollifierStencil {
  std::vector<std::array<double, 2>> offsets;  // unit-ball points xi_q
  std::vector<double> weights;                 // sum to 1
};

inline MollifierStencil make_mollifier_stencil(const MollifierSpec& spec) {
  const QuadRule q = gauss_legendre(spec.quadrature_order);
  MollifierStencil st;
  if (spec.dimension == 1) {
    for (int i = 0; i < spec.quadrature_order; ++i) {
      double w = q.weights[i] * detail::bump_unnormalized(q.nodes[i] * q.nodes[i]);
      st.offsets.push_back({q.nodes[i], 0.0});
      st.weights.push_back(w);
    }
  } else {
    for (int i = 0; i < spec.quadrature_order; ++i)
      for (int j = 0; j < spec.quadrature_order; ++j) {
        const double rr = q.nodes[i] * q.nodes[i] + q.nodes[j] * q.nodes[j];
        if (rr >= 1.0) continue;
        st.offsets.push_back({q.nodes[i], q.nodes[j]});
        st.weights.push_back(q.weights[i] * q.weights[j] *
                             detail::bump_unnormalized(rr));
      }
  }
  double total = 0.0;
  for (double w : st.weights) total += w;
  for (double& w : st.weights) w /= total;
  return st;
}

/// Number of midpoint samples used for the time average over [t, t+lambda].
inline int mollifier_time_samples(double lambda, double dt) {
  const int per_step = 4;
  const int spans = static_cast<int>(std::ceil(lambda / dt));
  return std::max(per_step, per_step * spans);
}

/// The mollified coefficient: the average over s in [t, t+lambda] of the
/// spatial mollification of smoothed_conductivity(z). Evaluations beyond T
/// use the terminal slice; evaluations outside Omega clamp to the nearest
/// cell center. Throws std::domain_error when t is outside [0, T].
inline double mollified_coefficient(const SpaceTimeField& z, double t,
                                    const std::array<double, 2>& x,
                                    const EnthalpyParams& p,
                                    const MollifierStencil& st) {
  const double T = z.times.horizon;
  if (t < 0.0 || t > T)
    throw std::domain_error("mollified_coefficient: t outside [0, T]");
  const int ns = mollifier_time_samples(p.lambda, z.times.dt());
  double acc = 0.0;
  for (int j = 0; j < ns; ++j) {
    const double s = t + (j + 0.5) * p.lambda / ns;
    double space = 0.0;
    for (size_t q = 0; q < st.offsets.size(); ++q) {
      const std::array<double, 2> pt = {x[0] - p.lambda * st.offsets[q][0],
                                        x[1] - p.lambda * st.offsets[q][1]};
      space += st.weights[q] * smoothed_conductivity(extend_field(z, s, pt), p);
    }
    acc += space;
  }
  return acc / ns;
}

}  // namespace mushy
