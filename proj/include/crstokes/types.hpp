#pragma once

#include <Eigen/Core>

#include <functional>

namespace crstokes {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Point = Vec2;

using ScalarFn = std::function<double(const Point&)>;
using VectorFn = std::function<Vec2(const Point&)>;
/// Jacobian closure, J(i, j) = d v_i / d x_j.
using JacobianFn = std::function<Mat2(const Point&)>;

/// Scalar field together with its analytic gradient.
struct SmoothScalarField {
  ScalarFn value;
  VectorFn gradient;
};

/// Vector field together with its analytic Jacobian.
struct SmoothVectorField {
  VectorFn value;
  JacobianFn jacobian;
};

}  // namespace crstokes
