#pragma once

#include "crstokes/cr_space.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace crstokes {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Equation of state rho = A p, total mass M and stabilization exponents.
struct SchemeParams {
  double A = 1.0;
  double M = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double rho_star = 1.0;  // M / |Omega|

  /// Validates A, M > 0 always; alpha >= 1 and 0 < beta < 2 unless
  /// `allow_out_of_range`, in which case a warning is written to std::clog.
  static SchemeParams make(double A, double M, double alpha, double beta, double domain_measure,
                           bool allow_out_of_range = false);
};

struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::string index_space;
};

/// Discrete momentum balance on free velocity DOFs: stiffness * u - coupling^T p = load.
struct MomentumSystem {
  SparseMatrix stiffness;         // 2n x 2n, block diagonal across components
  SparseMatrix scalar_stiffness;  // n x n, one component block
  SparseMatrix coupling;          // cells x 2n, entries |K| d(phi_sigma)/dx_i on K
  Eigen::VectorXd load;           // int f . phi
};

MomentumSystem assemble_momentum(const Discretization& disc, const VectorFn& f, int quad_order = 4);
/// Same operators with zero load.
MomentumSystem assemble_momentum(const Discretization& disc);

/// v_{sigma,K} = |sigma| u_sigma . n_KL seen from `from_cell`.
double edge_velocity_flux(const Discretization& disc, const VelocityField& u, int edge,
                          int from_cell);

/// Upwind choice: rho_K when v >= 0, rho_L otherwise.
constexpr double upwind_density(double rho_K, double rho_L, double v) {
  return v >= 0.0 ? rho_K : rho_L;
}

/// (h_K + h_L)^beta |sigma| / h_sigma for an interior edge.
double stabilization_coefficient(const Discretization& disc, int edge, double beta);

/// Mass balance rows with the T_stab,2 weight frozen at |rho_prev,K + rho_prev,L|.
/// `source` is an optional per-cell mass source added to the right-hand side;
/// it must sum to zero.
SparseSystem assemble_mass_balance(const Discretization& disc, const VelocityField& u,
                                   const CellField& rho_prev, const SchemeParams& params,
                                   std::span<const double> source = {});

/// Genuine per-cell residual of the mass balance (weight |rho_K + rho_L| from rho itself).
std::vector<double> mass_row_residuals(const Discretization& disc, const VelocityField& u,
                                       const CellField& rho, const SchemeParams& params,
                                       std::span<const double> source = {});

struct MatrixEntryViolation {
  int row;
  int col;
  double value;
  std::string kind;
};

struct MMatrixReport {
  bool diagonal_positive = true;
  bool offdiagonal_nonpositive = true;
  bool inverse_checked = false;
  bool inverse_nonnegative = true;
  double min_inverse_entry = 0.0;
  double max_inverse_entry = 0.0;
  bool column_dominant = true;
  std::vector<MatrixEntryViolation> violations;

  bool pass() const {
    return diagonal_positive && offdiagonal_nonpositive &&
           (inverse_checked ? inverse_nonnegative : column_dominant);
  }
};

MMatrixReport verify_m_matrix(const SparseMatrix& matrix, int dense_threshold = 200);
inline MMatrixReport verify_m_matrix(const SparseSystem& system, int dense_threshold = 200) {
  return verify_m_matrix(system.matrix, dense_threshold);
}

struct ResidualTriple {
  double momentum = 0.0;     // |stiffness u - coupling^T p - load|_2 on free DOFs
  double mass = 0.0;         // sum over cells of |R_K|
  double mass_max = 0.0;     // max over cells of |R_K|
  double mass_defect = 0.0;  // |int rho - M|
};

ResidualTriple nonlinear_residual(const Discretization& disc, const MomentumSystem& system,
                                  const VelocityField& u, const CellField& p,
                                  const SchemeParams& params, std::span<const double> source = {});

/// int_Omega rho.
double integrate(const Discretization& disc, const CellField& q);

void write_matrix_market(std::ostream& os, const SparseMatrix& matrix);

}  // namespace crstokes
