#include "crstokes/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace crstokes {

QuadRule1D gauss_legendre(int n) {
  if (n < 1 || n > 64)
    throw std::invalid_argument("gauss_legendre: point count must be in [1, 64], got " +
                                std::to_string(n));
  QuadRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n from the Chebyshev-like initial guess.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.points[i] = 0.5 * (1.0 - z);
    rule.points[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.5;
  return rule;
}

std::vector<QuadPoint> segment_rule(const Point& a, const Point& b, int n) {
  const QuadRule1D g = gauss_legendre(n);
  const double len = (b - a).norm();
  std::vector<QuadPoint> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back({a + g.points[i] * (b - a), g.weights[i] * len});
  return out;
}

std::vector<QuadPoint> triangle_rule(const Point& a, const Point& b, const Point& c, int n) {
  const QuadRule1D g = gauss_legendre(n);
  const Vec2 e1 = b - a, e2 = c - a;
  const double jac = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
  std::vector<QuadPoint> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double s = g.points[i];
    for (int j = 0; j < n; ++j) {
      const double t = g.points[j] * (1.0 - s);
      out.push_back({a + s * e1 + t * e2, g.weights[i] * g.weights[j] * (1.0 - s) * jac});
    }
  }
  return out;
}

}  // namespace crstokes
