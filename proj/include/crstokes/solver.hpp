#pragma once

#include "crstokes/scheme.hpp"

#include <Eigen/SparseCholesky>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace crstokes {

enum class LinearSolveMode { Auto, Direct, Iterative };

/// Outer iteration used by solve_scheme.
enum class NonlinearMethod {
  /// Alternating mass / momentum solves with damping.
  Picard,
  /// Newton on the coupled (u, rho) system, each trial velocity followed by a
  /// positive mass solve.
  Newton,
};

struct SolverControls {
  double tolerance = 1e-10;
  int max_iterations = 200;
  double damping = 1.0;
  LinearSolveMode linear_mode = LinearSolveMode::Auto;
  /// Auto mode uses sparse direct solves below this many unknowns.
  int direct_threshold = 200000;
  double linear_tolerance = 1e-13;
  int linear_max_iterations = 10000;
  std::uint64_t seed = 20240601;
  NonlinearMethod method = NonlinearMethod::Picard;
  int quad_order = 4;
  /// Called with every frozen-weight mass system before it is solved.
  std::function<void(const SparseSystem&)> mass_system_observer;

  void validate() const;
};

struct Solution {
  VelocityField u;
  CellField p;
  CellField rho;
  SchemeParams params;
};

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;
  ResidualTriple parts;
  double min_rho = 0.0;
  double damping = 1.0;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::string method;
  std::vector<IterationRecord> history;
  ResidualTriple final_residual;
  double final_combined = 0.0;
  double min_rho = 0.0;
  double wall_seconds = 0.0;
  /// Linear solves that fell back to a direct factorization.
  int direct_fallbacks = 0;
};

/// Thrown on non-finite iterates or a singular system.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frozen-weight mass solve; the result is strictly positive.
CellField solve_mass(const Discretization& disc, const VelocityField& u, const CellField& rho_prev,
                     const SchemeParams& params, const SolverControls& controls,
                     std::span<const double> source = {}, int* direct_fallbacks = nullptr);

/// Factorizes the momentum block once and solves stiffness u = load + coupling^T p
/// component by component.
class MomentumSolver {
 public:
  MomentumSolver(const Discretization& disc, const MomentumSystem& system,
                 const SolverControls& controls);
  VelocityField solve(const CellField& p);
  /// Relative residual of the last solve.
  double last_relative_residual() const { return last_residual_; }
  int direct_fallbacks() const { return fallbacks_; }

 private:
  Eigen::VectorXd solve_block(const Eigen::VectorXd& rhs);

  const Discretization* disc_;
  const MomentumSystem* system_;
  SolverControls controls_;
  bool direct_ = true;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool factorized_ = false;
  double last_residual_ = 0.0;
  int fallbacks_ = 0;
};

VelocityField solve_momentum(const Discretization& disc, const MomentumSystem& system,
                             const CellField& p, const SolverControls& controls);

/// Combined residual: momentum / |load| (1 if the load vanishes) + mass / rho*
/// + mass_defect / M.
double combined_residual(const ResidualTriple& r, const MomentumSystem& system,
                         const SchemeParams& params);

/// Damped Picard alternation: mass solve with frozen weights, p = rho / A,
/// momentum solve. Halves the damping (down to 1/16) after three consecutive
/// residual increases.
std::pair<Solution, SolveReport> picard_solve(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls);

/// Newton on the coupled system with positivity-preserving mass projection.
std::pair<Solution, SolveReport> newton_solve(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls);

/// Dispatches on controls.method.
std::pair<Solution, SolveReport> solve_scheme(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls);

}  // namespace crstokes
