#pragma once

#include "crstokes/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

namespace crstokes {

/// Edge-based velocity DOFs (interior edges only, exterior edges are pinned to
/// zero) and cell-based pressure DOFs.
///
/// Free velocity DOFs are numbered component-major: dof = c * n_interior + k
/// where k is the position of the edge among interior edges.
struct DofMap {
  std::vector<int> edge_to_interior;  // -1 on exterior edges
  std::vector<int> interior_to_edge;
  int num_cells = 0;

  int num_interior() const { return static_cast<int>(interior_to_edge.size()); }
  int num_velocity_dofs() const { return 2 * num_interior(); }
  int num_pressure_dofs() const { return num_cells; }
  /// Free DOF of (edge, component), or -1 for a constrained exterior edge.
  int velocity_dof(int edge, int component) const {
    const int k = edge_to_interior[edge];
    return k < 0 ? -1 : component * num_interior() + k;
  }
};

DofMap build_dofmap(const Mesh& mesh);

/// Scalar Crouzeix-Raviart function: one edge mean per edge.
struct CRFunction {
  std::vector<double> values;
};

struct VelocityField {
  std::array<CRFunction, 2> components;
};

/// Piecewise constant field, one value per cell.
struct CellField {
  std::vector<double> values;
};

/// Mesh, geometry and DOF numbering bundled for the discrete operators.
struct Discretization {
  Mesh mesh;
  GeometryTables geo;
  DofMap dofs;

  explicit Discretization(Mesh m);
};

CRFunction zero_cr(const Discretization& disc);
VelocityField zero_velocity(const Discretization& disc);
CellField constant_cell_field(const Discretization& disc, double value);

/// phi_sigma on `cell` at x: 1 - 2 lambda_opp(x).
double eval_basis(const Discretization& disc, int edge, int cell, const Point& x);

/// Affine representative of v on `cell` evaluated at x.
double evaluate(const Discretization& disc, const CRFunction& v, int cell, const Point& x);
Vec2 evaluate(const Discretization& disc, const VelocityField& u, int cell, const Point& x);

/// Cellwise constant gradient of the affine representative.
std::vector<Vec2> broken_gradient(const Discretization& disc, const CRFunction& v);
/// Row i of each matrix is the gradient of component i.
std::vector<Mat2> broken_gradient(const Discretization& disc, const VelocityField& u);
std::vector<double> broken_divergence(const Discretization& disc, const VelocityField& u);

/// Edge means |sigma|^-1 int_sigma f with an n-point Gauss rule.
CRFunction interpolate_rh(const Discretization& disc, const ScalarFn& f, int points = 3);
VelocityField interpolate_rh(const Discretization& disc, const VectorFn& f, int points = 3);

/// Largest |value| on exterior edges; nonzero means the field is not in V_h.
double boundary_defect(const Discretization& disc, const CRFunction& v);

double broken_h1_seminorm(const Discretization& disc, const CRFunction& v);
double broken_h1_seminorm(const Discretization& disc, const VelocityField& u);

/// sqrt of sum over interior sigma = K|L of (h_K + h_L)^beta |sigma| / h_sigma (q_K - q_L)^2.
double discrete_rho_seminorm(const Discretization& disc, const CellField& q, double beta);

struct EdgeJump {
  double integral = 0.0;         // int_sigma [v]
  double square_integral = 0.0;  // int_sigma [v]^2
};

/// Jumps oriented K -> L ([v] = v|_K - v|_L); on exterior edges [v] = v|_K.
std::vector<EdgeJump> edge_jump_integrals(const Discretization& disc, const CRFunction& v);

/// Free-DOF vector (exterior values dropped) and its inverse.
Eigen::VectorXd to_free_vector(const Discretization& disc, const VelocityField& u);
VelocityField from_free_vector(const Discretization& disc, const Eigen::VectorXd& x);

}  // namespace crstokes
