#pragma once

#include "crstokes/rates.hpp"
#include "crstokes/solver.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace crstokes {

/// Exact (u, p, rho) on the unit square built from a stream potential, with
/// div(rho u) = 0 and u = 0 on the boundary.
///
/// psi0 = amplitude * (x(1-x)y(1-y))^2 * T_mode, T_0 = 1, T_k = 1 + sin(k pi x) sin(k pi y) / 2.
/// p = p_m for mode 0, p = p_m (1 + cos(k pi x) cos(k pi y) / 4) otherwise, p_m = M / A.
/// u = curl(psi0) / (A p).
struct ManufacturedCase {
  int mode = 0;
  double A = 1.0;
  double M = 1.0;
  double amplitude = 1.0;
  double domain_measure = 1.0;

  SmoothVectorField u;
  SmoothScalarField p;
  ScalarFn rho;
  /// rho u = curl psi0.
  VectorFn momentum;
  /// div(rho u) from the analytic derivatives.
  ScalarFn div_momentum;
  /// -Laplace(u) + grad p from exact derivatives.
  VectorFn f;
  /// Componentwise Laplacian of u.
  VectorFn laplacian_u;
};

/// Throws invalid_argument for A, M <= 0, mode < 0, or when the construction
/// fails its own checks (mass, positivity).
ManufacturedCase stream_function_case(double A, double M, int mode, double amplitude = 1.0);

/// Same forcing from 4th-order central differences of the u and p closures.
VectorFn finite_difference_forcing(const ManufacturedCase& mc, double step = 1e-3);

struct ErrorSet {
  double u_h1b = 0.0;         // |u_h - u|_{1,h} by cell quadrature
  double u_h1b_interp = 0.0;  // |u_h - r_h u|_{1,h}
  double u_l2 = 0.0;          // ||u_h - u||_{L2}
  double p_l2 = 0.0;          // ||p_h - cell mean of p||_{L2}
};

ErrorSet compute_errors(const Discretization& disc, const Solution& sol, const ManufacturedCase& mc,
                        int quad_order = 5);

struct StudyLevel {
  int level = 0;
  double h = 0.0;
  int cells = 0;
  int velocity_dofs = 0;
  ErrorSet errors;
  bool converged = false;
  int iterations = 0;
  double min_rho = 0.0;
  double final_residual = 0.0;
  double seconds = 0.0;
};

struct RateTable {
  std::vector<StudyLevel> levels;
  /// Fits over converged levels only; empty when fewer than three converged.
  std::optional<LogLogFit> slope_u_h1b;
  std::optional<LogLogFit> slope_u_h1b_interp;
  std::optional<LogLogFit> slope_u_l2;
  std::optional<LogLogFit> slope_p_l2;
  std::vector<int> levels_used;
};

using LevelCallback = std::function<void(int level, const Discretization&, const Solution&,
                                         const SolveReport&)>;

/// Solves on base, refine(base), ... (`levels` meshes in total). Levels are
/// solved concurrently up to `max_threads`; the callback runs afterwards, in
/// level order.
RateTable convergence_study(const ManufacturedCase& mc, const Mesh& base, int levels, double alpha,
                            double beta, const SolverControls& controls,
                            const LevelCallback& on_level = {}, int max_threads = 1);

/// Header `level,h,err_u_h1b,err_u_l2,err_p_l2`, then `# slope_...=` lines.
void write_rate_csv(std::ostream& os, const RateTable& table);

}  // namespace crstokes
