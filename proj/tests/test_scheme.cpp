#include "crstokes/scheme.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace crstokes;

namespace {

const double kSqrt2 = std::sqrt(2.0);

SchemeParams unit_params(double alpha = 1.0, double beta = 1.0) {
  return SchemeParams::make(1.0, 1.0, alpha, beta, 1.0);
}

VelocityField random_velocity(const Discretization& d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  VelocityField v = zero_velocity(d);
  for (int e : d.dofs.interior_to_edge)
    for (int c = 0; c < 2; ++c) v.components[c].values[e] = u(rng);
  return v;
}

CellField random_density(const Discretization& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  CellField r = constant_cell_field(d, 1.0);
  for (double& x : r.values) x = u(rng);
  return r;
}

}  // namespace

TEST(SchemeParams, ValidatesAndDerivesRhoStar) {
  const auto p = SchemeParams::make(2.0, 3.0, 1.5, 0.5, 1.5);
  EXPECT_DOUBLE_EQ(p.rho_star, 2.0);
  EXPECT_THROW(SchemeParams::make(0.0, 1.0, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(SchemeParams::make(1.0, -1.0, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(SchemeParams::make(1.0, 1.0, 0.5, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(SchemeParams::make(1.0, 1.0, 1.0, 2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(SchemeParams::make(1.0, 1.0, 1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_NO_THROW(SchemeParams::make(1.0, 1.0, 0.5, 2.5, 1.0, true));
}

TEST(Momentum, ZeroForcingGivesZeroLoad) {
  const Discretization d(build_structured(3, 3));
  const auto sys = assemble_momentum(d, [](const Point&) { return Vec2(0, 0); });
  EXPECT_EQ(sys.load.norm(), 0.0);
  EXPECT_THROW(assemble_momentum(d, [](const Point&) { return Vec2(0, 0); }, 0), std::invalid_argument);
}

TEST(Momentum, StiffnessSymmetricPositiveDefiniteAndBlockDiagonal) {
  const Discretization d(refine_uniform(build_structured(2, 3)));
  const auto sys = assemble_momentum(d);
  const Eigen::MatrixXd A(sys.stiffness);
  EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-13 * A.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  const int n = d.dofs.num_interior();
  EXPECT_EQ(A.topRightCorner(n, n).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((A.topLeftCorner(n, n) - Eigen::MatrixXd(sys.scalar_stiffness)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Momentum, StiffnessIsBrokenDirichletForm) {
  const Discretization d(build_structured(3, 2));
  const auto sys = assemble_momentum(d);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  VelocityField v = zero_velocity(d);
  for (int e : d.dofs.interior_to_edge)
    for (int c = 0; c < 2; ++c) v.components[c].values[e] = u(rng);
  const Eigen::VectorXd x = to_free_vector(d, v);
  EXPECT_NEAR(x.dot(sys.stiffness * x), std::pow(broken_h1_seminorm(d, v), 2), 1e-12);
}

TEST(Momentum, CouplingRowIsCellDivergence) {
  const Discretization d(build_structured(1, 1));
  const auto sys = assemble_momentum(d);
  const auto v = random_velocity(d, 9);
  const Eigen::VectorXd Bv = sys.coupling * to_free_vector(d, v);
  // Dense oracle: fit each component's affine representative through the edge midpoints.
  for (int K = 0; K < 2; ++K) {
    double div = 0.0;
    for (int c = 0; c < 2; ++c) {
      Eigen::Matrix3d M;
      Eigen::Vector3d b;
      for (int i = 0; i < 3; ++i) {
        const int e = d.mesh.cell_edges[K][i];
        M.row(i) << 1.0, d.geo.edge_centroid[e].x(), d.geo.edge_centroid[e].y();
        b[i] = v.components[c].values[e];
      }
      div += M.fullPivLu().solve(b)[1 + c];
    }
    EXPECT_NEAR(Bv[K], d.geo.cell_measure[K] * div, 1e-14);
  }
}

TEST(Momentum, CouplingActionIdentityAndConstantKernel) {
  const Discretization d(refine_uniform(build_structured(2, 2)));
  const auto sys = assemble_momentum(d);
  const auto v = random_velocity(d, 4);
  const auto q = random_density(d, 8);
  const auto div = broken_divergence(d, v);
  double integral = 0.0;
  for (std::size_t K = 0; K < div.size(); ++K) integral += q.values[K] * div[K] * d.geo.cell_measure[K];
  const Eigen::Map<const Eigen::VectorXd> qv(q.values.data(), q.values.size());
  EXPECT_NEAR(qv.dot(sys.coupling * to_free_vector(d, v)), integral, 1e-12 * std::max(1.0, std::abs(integral)));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.mesh.num_cells());
  EXPECT_LE((sys.coupling.transpose() * ones).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Momentum, ConstantLoadIsThirdOfAreas) {
  const Discretization d(build_structured(2, 2));
  const auto sys = assemble_momentum(d, [](const Point&) { return Vec2(1.0, 2.0); });
  const int n = d.dofs.num_interior();
  for (int k = 0; k < n; ++k) {
    const int e = d.dofs.interior_to_edge[k];
    const auto& ec = d.mesh.edge_cells[e];
    const double expected = (d.geo.cell_measure[ec[0]] + d.geo.cell_measure[ec[1]]) / 3.0;
    EXPECT_NEAR(sys.load[k], expected, 1e-15);
    EXPECT_NEAR(sys.load[n + k], 2.0 * expected, 1e-15);
  }
}

TEST(EdgeFlux, DotProductAntisymmetryAndOrthogonality) {
  const Discretization d(build_structured(1, 1));
  const int e = d.dofs.interior_to_edge.at(0);
  const int K = d.mesh.edge_cells[e][0], L = d.mesh.edge_cells[e][1];
  const Vec2 n = d.geo.edge_normal[e];
  VelocityField u = zero_velocity(d);
  u.components[0].values[e] = n.x();
  u.components[1].values[e] = n.y();
  EXPECT_NEAR(d.geo.edge_measure[e], kSqrt2, 1e-15);
  EXPECT_NEAR(edge_velocity_flux(d, u, e, K), kSqrt2, 1e-15);
  EXPECT_NEAR(edge_velocity_flux(d, u, e, L), -kSqrt2, 1e-15);
  u.components[0].values[e] = -n.y();
  u.components[1].values[e] = n.x();
  EXPECT_NEAR(edge_velocity_flux(d, u, e, K), 0.0, 1e-15);
}

TEST(EdgeFlux, RejectsBoundaryAndForeignCell) {
  const Discretization d(build_structured(2, 2));
  const auto u = zero_velocity(d);
  int boundary = 0;
  while (!d.mesh.is_boundary(boundary)) ++boundary;
  EXPECT_THROW(edge_velocity_flux(d, u, boundary, d.mesh.edge_cells[boundary][0]), std::invalid_argument);
  const int e = d.dofs.interior_to_edge.at(0);
  int foreign = 0;
  while (foreign == d.mesh.edge_cells[e][0] || foreign == d.mesh.edge_cells[e][1]) ++foreign;
  EXPECT_THROW(edge_velocity_flux(d, u, e, foreign), std::invalid_argument);
}

TEST(Upwind, Definition) {
  static_assert(upwind_density(2, 5, 3) == 2);
  static_assert(upwind_density(2, 5, -3) == 5);
  static_assert(upwind_density(2, 5, 0) == 2);
  EXPECT_EQ(3 * upwind_density(2, 5, 3), 6);
  EXPECT_EQ(-3 * upwind_density(2, 5, -3), -15);
}

TEST(MassBalance, ZeroVelocitySolvesToRhoStar) {
  const Discretization d(build_structured(1, 1));
  const auto params = SchemeParams::make(1.0, 3.0, 1.0, 1.0, 1.0);
  const auto sys = assemble_mass_balance(d, zero_velocity(d), constant_cell_field(d, 0.7), params);
  const Eigen::MatrixXd M(sys.matrix);
  const Eigen::Vector2d rho = M.fullPivLu().solve(sys.rhs);
  EXPECT_NEAR(rho[0], 3.0, 1e-14);
  EXPECT_NEAR(rho[1], 3.0, 1e-14);
  // Off-diagonals: -(h_K + h_L)^beta |sigma| / h_sigma * |rho_K + rho_L|.
  const double off = -(2 * kSqrt2) * 1.0 * 1.4;
  EXPECT_NEAR(M(0, 1), off, 1e-14);
  EXPECT_NEAR(M(1, 0), off, 1e-14);
  const Eigen::Matrix2d inv = M.inverse();
  EXPECT_GE(inv.minCoeff(), 0.0);
  EXPECT_TRUE(verify_m_matrix(sys).pass());
}

TEST(MassBalance, SignPatternAndInverseForRandomInputs) {
  Mesh m = build_structured(3, 2);
  for (int l = 0; l < 2; ++l, m = refine_uniform(m)) {
    const Discretization d(m);
    for (int s = 0; s < 5; ++s) {
      const auto sys = assemble_mass_balance(d, random_velocity(d, s, 10.0), random_density(d, s + 50),
                                             unit_params(1.0 + s * 0.3, 0.2 + s * 0.35));
      const auto rep = verify_m_matrix(sys);
      EXPECT_TRUE(rep.pass());
      EXPECT_TRUE(rep.inverse_checked);
      EXPECT_TRUE(rep.column_dominant);
      EXPECT_GT((sys.rhs.array()).minCoeff(), 0.0);
    }
  }
}

TEST(MassBalance, RowSumIdentityAndConservativity) {
  const Discretization d(refine_uniform(build_structured(3, 3)));
  const auto params = unit_params();
  const auto u = random_velocity(d, 2, 5.0);
  const auto rho = random_density(d, 3);
  const auto r = mass_row_residuals(d, u, rho, params);
  double sum = 0.0, anchor = 0.0;
  const double ha = std::pow(d.geo.h, params.alpha);
  for (std::size_t K = 0; K < r.size(); ++K) {
    sum += r[K];
    anchor += ha * d.geo.cell_measure[K] * (rho.values[K] - params.rho_star);
  }
  EXPECT_NEAR(sum, anchor, 1e-12);
  // Frozen system evaluated at its own weights agrees with the genuine residual.
  const auto sys = assemble_mass_balance(d, u, rho, params);
  const Eigen::Map<const Eigen::VectorXd> x(rho.values.data(), rho.values.size());
  const Eigen::VectorXd frozen = sys.matrix * x - sys.rhs;
  for (std::size_t K = 0; K < r.size(); ++K) EXPECT_NEAR(frozen[K], r[K], 1e-12);
}

TEST(MassBalance, ExactSolvePinsTotalMass) {
  const Discretization d(refine_uniform(build_structured(2, 2)));
  const auto params = SchemeParams::make(1.0, 2.5, 1.0, 1.0, 1.0);
  const auto sys = assemble_mass_balance(d, random_velocity(d, 12, 3.0), random_density(d, 13), params);
  const Eigen::VectorXd rho = Eigen::MatrixXd(sys.matrix).fullPivLu().solve(sys.rhs);
  double mass = 0.0;
  for (int K = 0; K < rho.size(); ++K) mass += d.geo.cell_measure[K] * rho[K];
  EXPECT_NEAR(mass, 2.5, 1e-12 * 2.5);
  EXPECT_GT(rho.minCoeff(), 0.0);
}

TEST(MassBalance, RejectsBadInput) {
  const Discretization d(build_structured(1, 1));
  auto u = zero_velocity(d);
  const auto rho = constant_cell_field(d, 1.0);
  const std::vector<double> unbalanced{1.0, 0.5};
  EXPECT_THROW(assemble_mass_balance(d, u, rho, unit_params(), unbalanced), std::invalid_argument);
  const std::vector<double> balanced{1.0, -1.0};
  EXPECT_NO_THROW(assemble_mass_balance(d, u, rho, unit_params(), balanced));
  u.components[0].values[d.dofs.interior_to_edge[0]] = NAN;
  EXPECT_THROW(assemble_mass_balance(d, u, rho, unit_params()), std::invalid_argument);
}

TEST(VerifyMMatrix, DetectsPositiveOffDiagonal) {
  SparseMatrix m(3, 3);
  m.insert(0, 0) = 2;
  m.insert(1, 1) = 2;
  m.insert(2, 2) = 2;
  m.insert(1, 2) = 0.5;
  m.makeCompressed();
  const auto rep = verify_m_matrix(m);
  EXPECT_FALSE(rep.pass());
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_EQ(rep.violations.front().row, 1);
  EXPECT_EQ(rep.violations.front().col, 2);
}

TEST(VerifyMMatrix, IdentityPassesAndLargePathUsesDominance) {
  SparseMatrix id(5, 5);
  id.setIdentity();
  EXPECT_TRUE(verify_m_matrix(id).pass());
  const auto big = verify_m_matrix(id, 2);
  EXPECT_FALSE(big.inverse_checked);
  EXPECT_TRUE(big.pass());
  SparseMatrix weak(2, 2);
  weak.insert(0, 0) = 1;
  weak.insert(1, 0) = -2;
  weak.insert(1, 1) = 1;
  weak.makeCompressed();
  EXPECT_FALSE(verify_m_matrix(weak, 1).pass());
}

TEST(Residual, FixedPointAndDefectLinearity) {
  const Discretization d(build_structured(3, 3));
  const auto params = SchemeParams::make(2.0, 1.0, 1.0, 1.0, 1.0);
  const auto sys = assemble_momentum(d);
  CellField p = constant_cell_field(d, params.rho_star / params.A);
  auto r = nonlinear_residual(d, sys, zero_velocity(d), p, params);
  EXPECT_NEAR(r.momentum, 0.0, 1e-14);
  EXPECT_NEAR(r.mass, 0.0, 1e-15);
  EXPECT_NEAR(r.mass_defect, 0.0, 1e-15);
  const double delta = 1e-3;
  p.values[4] += delta / params.A;
  r = nonlinear_residual(d, sys, zero_velocity(d), p, params);
  EXPECT_NEAR(r.mass_defect, d.geo.cell_measure[4] * delta, 1e-15);
}

TEST(MatrixMarket, Header) {
  SparseMatrix id(2, 2);
  id.setIdentity();
  std::ostringstream os;
  write_matrix_market(os, id);
  EXPECT_EQ(os.str(), "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 2 1\n");
}
