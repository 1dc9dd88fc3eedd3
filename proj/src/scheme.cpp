#include "crstokes/scheme.hpp"

#include "crstokes/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cmath>
#include <iomanip>
#include <iostream>
#include <stdexcept>

namespace crstokes {

SchemeParams SchemeParams::make(double A, double M, double alpha, double beta,
                                double domain_measure, bool allow_out_of_range) {
  if (!(A > 0.0)) throw std::invalid_argument("SchemeParams: A must be positive");
  if (!(M > 0.0)) throw std::invalid_argument("SchemeParams: M must be positive");
  if (!(domain_measure > 0.0)) throw std::invalid_argument("SchemeParams: |Omega| must be positive");
  const bool alpha_ok = alpha >= 1.0;
  const bool beta_ok = beta > 0.0 && beta < 2.0;
  if (!alpha_ok || !beta_ok) {
    if (!allow_out_of_range)
      throw std::invalid_argument("SchemeParams: need alpha >= 1 and 0 < beta < 2 (got alpha=" +
                                  std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
    std::clog << "warning: stabilization exponents outside the analysed range (alpha=" << alpha
              << ", beta=" << beta << ")\n";
  }
  return SchemeParams{A, M, alpha, beta, M / domain_measure};
}

namespace {

// Gradient of phi_sigma (the edge opposite local vertex i) on cell k.
Vec2 basis_gradient(const Discretization& disc, int k, int i) {
  return -2.0 * disc.geo.barycentric_gradient[k][i];
}

SparseMatrix from_triplets(int rows, int cols, const std::vector<Eigen::Triplet<double>>& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

}  // namespace

MomentumSystem assemble_momentum(const Discretization& disc) {
  const auto& mesh = disc.mesh;
  const auto& dofs = disc.dofs;
  const int n = dofs.num_interior();
  std::vector<Eigen::Triplet<double>> ts, tb;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const int K = static_cast<int>(k);
    const double area = disc.geo.cell_measure[k];
    std::array<Vec2, 3> grad;
    for (int i = 0; i < 3; ++i) grad[i] = basis_gradient(disc, K, i);
    for (int i = 0; i < 3; ++i) {
      const int ri = dofs.edge_to_interior[mesh.cell_edges[k][i]];
      if (ri < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int rj = dofs.edge_to_interior[mesh.cell_edges[k][j]];
        if (rj < 0) continue;
        ts.emplace_back(ri, rj, area * grad[i].dot(grad[j]));
      }
      for (int c = 0; c < 2; ++c) tb.emplace_back(K, c * n + ri, area * grad[i][c]);
    }
  }
  MomentumSystem sys;
  sys.scalar_stiffness = from_triplets(n, n, ts);
  std::vector<Eigen::Triplet<double>> tfull;
  tfull.reserve(2 * ts.size());
  for (const auto& t : ts) {
    tfull.push_back(t);
    tfull.emplace_back(t.row() + n, t.col() + n, t.value());
  }
  sys.stiffness = from_triplets(2 * n, 2 * n, tfull);
  sys.coupling = from_triplets(static_cast<int>(mesh.num_cells()), 2 * n, tb);
  sys.load = Eigen::VectorXd::Zero(2 * n);
  return sys;
}

MomentumSystem assemble_momentum(const Discretization& disc, const VectorFn& f, int quad_order) {
  if (quad_order < 1) throw std::invalid_argument("assemble_momentum: quadrature order must be >= 1");
  MomentumSystem sys = assemble_momentum(disc);
  const auto& mesh = disc.mesh;
  const int n = disc.dofs.num_interior();
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const int K = static_cast<int>(k);
    const auto& c = mesh.cells[k];
    const auto rule = triangle_rule(mesh.vertices[c[0]], mesh.vertices[c[1]], mesh.vertices[c[2]],
                                    quad_order);
    for (const auto& q : rule) {
      const Vec2 fx = f(q.x);
      const auto lam = barycentric(mesh, disc.geo, K, q.x);
      for (int i = 0; i < 3; ++i) {
        const int ri = disc.dofs.edge_to_interior[mesh.cell_edges[k][i]];
        if (ri < 0) continue;
        const double phi = 1.0 - 2.0 * lam[i];
        sys.load[ri] += q.weight * fx.x() * phi;
        sys.load[n + ri] += q.weight * fx.y() * phi;
      }
    }
  }
  return sys;
}

double stabilization_coefficient(const Discretization& disc, int edge, double beta) {
  const auto& g = disc.geo;
  const auto& ec = disc.mesh.edge_cells[edge];
  return std::pow(g.cell_diameter[ec[0]] + g.cell_diameter[ec[1]], beta) * g.edge_measure[edge] /
         g.edge_diameter[edge];
}

double edge_velocity_flux(const Discretization& disc, const VelocityField& u, int edge,
                          int from_cell) {
  const auto& ec = disc.mesh.edge_cells[edge];
  if (ec[1] == kNoCell)
    throw std::invalid_argument("edge_velocity_flux: edge " + std::to_string(edge) +
                                " is on the boundary");
  if (from_cell != ec[0] && from_cell != ec[1])
    throw std::invalid_argument("edge_velocity_flux: cell " + std::to_string(from_cell) +
                                " is not incident to edge " + std::to_string(edge));
  const Vec2 ue(u.components[0].values[edge], u.components[1].values[edge]);
  const double v = disc.geo.edge_measure[edge] * ue.dot(disc.geo.edge_normal[edge]);
  return from_cell == ec[0] ? v : -v;
}

namespace {

void check_source(std::span<const double> source, std::size_t ncells) {
  if (source.empty()) return;
  if (source.size() != ncells) throw std::invalid_argument("mass source: size mismatch");
  double sum = 0.0, scale = 0.0;
  for (double g : source) {
    sum += g;
    scale += std::abs(g);
  }
  if (std::abs(sum) > 1e-12 * std::max(scale, 1e-300))
    throw std::invalid_argument("mass source must sum to zero");
}

void check_finite(const VelocityField& u) {
  for (const auto& c : u.components)
    for (double x : c.values)
      if (!std::isfinite(x)) throw std::invalid_argument("velocity field contains non-finite values");
}

}  // namespace

SparseSystem assemble_mass_balance(const Discretization& disc, const VelocityField& u,
                                   const CellField& rho_prev, const SchemeParams& params,
                                   std::span<const double> source) {
  const auto& mesh = disc.mesh;
  const int N = static_cast<int>(mesh.num_cells());
  check_finite(u);
  check_source(source, mesh.num_cells());
  const double h_alpha = std::pow(disc.geo.h, params.alpha);

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(7 * static_cast<std::size_t>(N));
  Eigen::VectorXd rhs(N);
  for (int K = 0; K < N; ++K) {
    const double anchor = h_alpha * disc.geo.cell_measure[K];
    t.emplace_back(K, K, anchor);
    rhs[K] = anchor * params.rho_star + (source.empty() ? 0.0 : source[K]);
  }
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const int E = static_cast<int>(e);
    if (mesh.is_boundary(E)) continue;
    const int K = mesh.edge_cells[e][0], L = mesh.edge_cells[e][1];
    const double v = edge_velocity_flux(disc, u, E, K);  // v_{sigma,L} = -v
    const double vp = std::max(v, 0.0), vm = -std::min(v, 0.0);
    // Row K: v+ rho_K - v- rho_L ; row L: v- rho_L - v+ rho_K.
    t.emplace_back(K, K, vp);
    t.emplace_back(K, L, -vm);
    t.emplace_back(L, L, vm);
    t.emplace_back(L, K, -vp);
    const double w = std::abs(rho_prev.values[K] + rho_prev.values[L]);
    const double tau = stabilization_coefficient(disc, E, params.beta) * w;
    t.emplace_back(K, K, tau);
    t.emplace_back(K, L, -tau);
    t.emplace_back(L, L, tau);
    t.emplace_back(L, K, -tau);
  }
  return SparseSystem{from_triplets(N, N, t), std::move(rhs), "cells"};
}

std::vector<double> mass_row_residuals(const Discretization& disc, const VelocityField& u,
                                       const CellField& rho, const SchemeParams& params,
                                       std::span<const double> source) {
  const auto& mesh = disc.mesh;
  check_source(source, mesh.num_cells());
  const double h_alpha = std::pow(disc.geo.h, params.alpha);
  std::vector<double> r(mesh.num_cells());
  for (std::size_t K = 0; K < r.size(); ++K) {
    r[K] = h_alpha * disc.geo.cell_measure[K] * (rho.values[K] - params.rho_star);
    if (!source.empty()) r[K] -= source[K];
  }
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const int E = static_cast<int>(e);
    if (mesh.is_boundary(E)) continue;
    const int K = mesh.edge_cells[e][0], L = mesh.edge_cells[e][1];
    const double rK = rho.values[K], rL = rho.values[L];
    const double v = edge_velocity_flux(disc, u, E, K);
    const double flux = v * upwind_density(rK, rL, v);
    const double stab = stabilization_coefficient(disc, E, params.beta) * std::abs(rK + rL) * (rK - rL);
    r[K] += flux + stab;
    r[L] -= flux + stab;
  }
  return r;
}

MMatrixReport verify_m_matrix(const SparseMatrix& matrix, int dense_threshold) {
  MMatrixReport rep;
  const int n = static_cast<int>(matrix.rows());
  if (matrix.cols() != n) throw std::invalid_argument("verify_m_matrix: matrix must be square");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), offcol = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < n; ++r)
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) {
      const int c = static_cast<int>(it.col());
      if (c == r) {
        diag[r] = it.value();
      } else {
        offcol[c] += std::abs(it.value());
        if (it.value() > 0.0) {
          rep.offdiagonal_nonpositive = false;
          rep.violations.push_back({r, c, it.value(), "positive off-diagonal"});
        }
      }
    }
  for (int r = 0; r < n; ++r) {
    if (!(diag[r] > 0.0)) {
      rep.diagonal_positive = false;
      rep.violations.push_back({r, r, diag[r], "nonpositive diagonal"});
    }
    if (diag[r] < offcol[r]) {
      rep.column_dominant = false;
      if (n > dense_threshold) rep.violations.push_back({r, r, diag[r] - offcol[r], "column not dominant"});
    }
  }
  if (n <= dense_threshold) {
    rep.inverse_checked = true;
    const Eigen::MatrixXd dense(matrix);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
    if (!lu.isInvertible()) {
      rep.inverse_nonnegative = false;
      rep.violations.push_back({-1, -1, 0.0, "singular matrix"});
      return rep;
    }
    const Eigen::MatrixXd inv = lu.inverse();
    rep.min_inverse_entry = inv.minCoeff();
    rep.max_inverse_entry = inv.cwiseAbs().maxCoeff();
    const double floor = -1e-12 * rep.max_inverse_entry;
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r)
        if (inv(r, c) < floor) {
          rep.inverse_nonnegative = false;
          rep.violations.push_back({r, c, inv(r, c), "negative inverse entry"});
        }
  }
  return rep;
}

double integrate(const Discretization& disc, const CellField& q) {
  double s = 0.0;
  for (std::size_t K = 0; K < q.values.size(); ++K) s += disc.geo.cell_measure[K] * q.values[K];
  return s;
}

ResidualTriple nonlinear_residual(const Discretization& disc, const MomentumSystem& system,
                                  const VelocityField& u, const CellField& p,
                                  const SchemeParams& params, std::span<const double> source) {
  ResidualTriple r;
  const Eigen::VectorXd x = to_free_vector(disc, u);
  const Eigen::Map<const Eigen::VectorXd> pv(p.values.data(), static_cast<Eigen::Index>(p.values.size()));
  const Eigen::VectorXd res = system.stiffness * x - system.coupling.transpose() * pv - system.load;
  r.momentum = res.norm();
  CellField rho{p.values};
  for (double& v : rho.values) v *= params.A;
  for (double x : mass_row_residuals(disc, u, rho, params, source)) {
    r.mass += std::abs(x);
    r.mass_max = std::max(r.mass_max, std::abs(x));
  }
  r.mass_defect = std::abs(integrate(disc, rho) - params.M);
  return r;
}

void write_matrix_market(std::ostream& os, const SparseMatrix& matrix) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int r = 0; r < matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace crstokes
