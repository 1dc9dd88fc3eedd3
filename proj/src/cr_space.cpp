#include "crstokes/cr_space.hpp"

#include "crstokes/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace crstokes {

DofMap build_dofmap(const Mesh& mesh) {
  DofMap d;
  d.num_cells = static_cast<int>(mesh.num_cells());
  d.edge_to_interior.assign(mesh.num_edges(), -1);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.is_boundary(static_cast<int>(e))) continue;
    d.edge_to_interior[e] = static_cast<int>(d.interior_to_edge.size());
    d.interior_to_edge.push_back(static_cast<int>(e));
  }
  return d;
}

Discretization::Discretization(Mesh m)
    : mesh(std::move(m)), geo(compute_geometry(mesh)), dofs(build_dofmap(mesh)) {}

CRFunction zero_cr(const Discretization& disc) {
  return CRFunction{std::vector<double>(disc.mesh.num_edges(), 0.0)};
}

VelocityField zero_velocity(const Discretization& disc) { return {{zero_cr(disc), zero_cr(disc)}}; }

CellField constant_cell_field(const Discretization& disc, double value) {
  return CellField{std::vector<double>(disc.mesh.num_cells(), value)};
}

double eval_basis(const Discretization& disc, int edge, int cell, const Point& x) {
  const int i = disc.mesh.local_edge_index(cell, edge);
  if (i < 0)
    throw std::invalid_argument("eval_basis: edge " + std::to_string(edge) + " is not on cell " +
                                std::to_string(cell));
  const auto lam = barycentric(disc.mesh, disc.geo, cell, x);
  return 1.0 - 2.0 * lam[i];
}

double evaluate(const Discretization& disc, const CRFunction& v, int cell, const Point& x) {
  const auto lam = barycentric(disc.mesh, disc.geo, cell, x);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += v.values[disc.mesh.cell_edges[cell][i]] * (1.0 - 2.0 * lam[i]);
  return s;
}

Vec2 evaluate(const Discretization& disc, const VelocityField& u, int cell, const Point& x) {
  return {evaluate(disc, u.components[0], cell, x), evaluate(disc, u.components[1], cell, x)};
}

std::vector<Vec2> broken_gradient(const Discretization& disc, const CRFunction& v) {
  std::vector<Vec2> g(disc.mesh.num_cells());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Vec2 s = Vec2::Zero();
    for (int i = 0; i < 3; ++i)
      s -= 2.0 * v.values[disc.mesh.cell_edges[k][i]] * disc.geo.barycentric_gradient[k][i];
    g[k] = s;
  }
  return g;
}

std::vector<Mat2> broken_gradient(const Discretization& disc, const VelocityField& u) {
  const auto g0 = broken_gradient(disc, u.components[0]);
  const auto g1 = broken_gradient(disc, u.components[1]);
  std::vector<Mat2> out(g0.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].row(0) = g0[k].transpose();
    out[k].row(1) = g1[k].transpose();
  }
  return out;
}

std::vector<double> broken_divergence(const Discretization& disc, const VelocityField& u) {
  const auto g = broken_gradient(disc, u);
  std::vector<double> div(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) div[k] = g[k].trace();
  return div;
}

CRFunction interpolate_rh(const Discretization& disc, const ScalarFn& f, int points) {
  CRFunction v = zero_cr(disc);
  for (std::size_t e = 0; e < disc.mesh.num_edges(); ++e) {
    const auto& ed = disc.mesh.edges[e];
    double s = 0.0;
    for (const auto& q : segment_rule(disc.mesh.vertices[ed[0]], disc.mesh.vertices[ed[1]], points))
      s += q.weight * f(q.x);
    v.values[e] = s / disc.geo.edge_measure[e];
  }
  return v;
}

VelocityField interpolate_rh(const Discretization& disc, const VectorFn& f, int points) {
  VelocityField u = zero_velocity(disc);
  for (std::size_t e = 0; e < disc.mesh.num_edges(); ++e) {
    const auto& ed = disc.mesh.edges[e];
    Vec2 s = Vec2::Zero();
    for (const auto& q : segment_rule(disc.mesh.vertices[ed[0]], disc.mesh.vertices[ed[1]], points))
      s += q.weight * f(q.x);
    s /= disc.geo.edge_measure[e];
    u.components[0].values[e] = s.x();
    u.components[1].values[e] = s.y();
  }
  return u;
}

double boundary_defect(const Discretization& disc, const CRFunction& v) {
  double m = 0.0;
  for (std::size_t e = 0; e < disc.mesh.num_edges(); ++e)
    if (disc.mesh.is_boundary(static_cast<int>(e))) m = std::max(m, std::abs(v.values[e]));
  return m;
}

double broken_h1_seminorm(const Discretization& disc, const CRFunction& v) {
  const auto g = broken_gradient(disc, v);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += disc.geo.cell_measure[k] * g[k].squaredNorm();
  return std::sqrt(s);
}

double broken_h1_seminorm(const Discretization& disc, const VelocityField& u) {
  const double a = broken_h1_seminorm(disc, u.components[0]);
  const double b = broken_h1_seminorm(disc, u.components[1]);
  return std::sqrt(a * a + b * b);
}

double discrete_rho_seminorm(const Discretization& disc, const CellField& q, double beta) {
  const auto& m = disc.mesh;
  const auto& g = disc.geo;
  double s = 0.0;
  for (std::size_t e = 0; e < m.num_edges(); ++e) {
    if (m.is_boundary(static_cast<int>(e))) continue;
    const int K = m.edge_cells[e][0], L = m.edge_cells[e][1];
    const double jump = q.values[K] - q.values[L];
    s += std::pow(g.cell_diameter[K] + g.cell_diameter[L], beta) * g.edge_measure[e] /
         g.edge_diameter[e] * jump * jump;
  }
  return std::sqrt(s);
}

std::vector<EdgeJump> edge_jump_integrals(const Discretization& disc, const CRFunction& v) {
  const auto& m = disc.mesh;
  std::vector<EdgeJump> out(m.num_edges());
  for (std::size_t e = 0; e < m.num_edges(); ++e) {
    const auto& ed = m.edges[e];
    const int K = m.edge_cells[e][0], L = m.edge_cells[e][1];
    // Traces are affine, so the jump squared is quadratic: 2 points are exact.
    for (const auto& q : segment_rule(m.vertices[ed[0]], m.vertices[ed[1]], 2)) {
      double jump = evaluate(disc, v, K, q.x);
      if (L != kNoCell) jump -= evaluate(disc, v, L, q.x);
      out[e].integral += q.weight * jump;
      out[e].square_integral += q.weight * jump * jump;
    }
  }
  return out;
}

Eigen::VectorXd to_free_vector(const Discretization& disc, const VelocityField& u) {
  Eigen::VectorXd x(disc.dofs.num_velocity_dofs());
  const int n = disc.dofs.num_interior();
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < n; ++k) x[c * n + k] = u.components[c].values[disc.dofs.interior_to_edge[k]];
  return x;
}

VelocityField from_free_vector(const Discretization& disc, const Eigen::VectorXd& x) {
  VelocityField u = zero_velocity(disc);
  const int n = disc.dofs.num_interior();
  if (x.size() != 2 * n) throw std::invalid_argument("from_free_vector: size mismatch");
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < n; ++k) u.components[c].values[disc.dofs.interior_to_edge[k]] = x[c * n + k];
  return u;
}

}  // namespace crstokes
