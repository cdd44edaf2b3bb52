#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace mushy {

struct QuadRule {
  std::vector<double> nodes;    // on [-1,1]
  std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre rule of the given order on [-1,1]. Nodes by Newton
/// iteration on the Legendre recurrence; accurate to machine precision for
/// the orders used here (<= 64).
inline QuadRule gauss_legendre(int n) {
  QuadRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess for the i-th root.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = x;
    q.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

/// Composite Gauss-Legendre integration of f over [a,b] with the given
/// panel count. Used for one-off normalization constants and test oracles.
template <class F>
double composite_gl(F&& f, double a, double b, int order, int panels) {
  const QuadRule q = gauss_legendre(order);
  const double hp = (b - a) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * hp;
    for (int i = 0; i < order; ++i) {
      const double x = lo + 0.5 * hp * (q.nodes[i] + 1.0);
      s += 0.5 * hp * q.weights[i] * f(x);
    }
  }
  return s;
}

}  // namespace mushy
