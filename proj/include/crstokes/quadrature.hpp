#pragma once

#include "crstokes/types.hpp"

#include <array>
#include <vector>

namespace crstokes {

struct QuadRule1D {
  std::vector<double> points;   // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// n-point Gauss-Legendre rule mapped to [0, 1]; exact for degree 2n-1.
QuadRule1D gauss_legendre(int n);

struct QuadPoint {
  Point x;
  double weight;  // absolute weight, sums to the measure of the domain
};

/// Points on the segment [a, b]; weights sum to |b - a|.
std::vector<QuadPoint> segment_rule(const Point& a, const Point& b, int n);

/// Collapsed-tensor (Duffy) rule with n x n points on the triangle (a, b, c).
/// Exact for polynomials of total degree 2n - 2.
std::vector<QuadPoint> triangle_rule(const Point& a, const Point& b, const Point& c, int n);

}  // namespace crstokes
