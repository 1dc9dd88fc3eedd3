#include "crstokes/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace crstokes {

void SolverControls::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("SolverControls: tolerance must be positive");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("SolverControls: damping must lie in (0, 1]");
  if (max_iterations < 1) throw std::invalid_argument("SolverControls: max_iterations must be >= 1");
  if (quad_order < 1) throw std::invalid_argument("SolverControls: quad_order must be >= 1");
  if (!(linear_tolerance > 0.0))
    throw std::invalid_argument("SolverControls: linear_tolerance must be positive");
}

namespace {

using ColMatrix = Eigen::SparseMatrix<double>;

bool use_direct(const SolverControls& c, Eigen::Index n) {
  switch (c.linear_mode) {
    case LinearSolveMode::Direct: return true;
    case LinearSolveMode::Iterative: return false;
    case LinearSolveMode::Auto: break;
  }
  return n <= c.direct_threshold;
}

Eigen::VectorXd sparse_lu_solve(const ColMatrix& a, const Eigen::VectorXd& b, const char* what) {
  Eigen::SparseLU<ColMatrix> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw SolverError(std::string(what) + ": singular system");
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw SolverError(std::string(what) + ": solve failed");
  return x;
}

double min_value(const CellField& f) { return *std::min_element(f.values.begin(), f.values.end()); }

void require_finite(const CellField& f, int iteration) {
  for (double v : f.values)
    if (!std::isfinite(v))
      throw SolverError("non-finite density at iteration " + std::to_string(iteration));
}

void require_finite(const VelocityField& u, int iteration) {
  for (const auto& c : u.components)
    for (double v : c.values)
      if (!std::isfinite(v))
        throw SolverError("non-finite velocity at iteration " + std::to_string(iteration));
}

CellField pressure_from_density(const CellField& rho, const SchemeParams& params) {
  CellField p{rho.values};
  for (double& v : p.values) v /= params.A;
  return p;
}

}  // namespace

CellField solve_mass(const Discretization& disc, const VelocityField& u, const CellField& rho_prev,
                     const SchemeParams& params, const SolverControls& controls,
                     std::span<const double> source, int* direct_fallbacks) {
  const SparseSystem sys = assemble_mass_balance(disc, u, rho_prev, params, source);
  if (controls.mass_system_observer) controls.mass_system_observer(sys);
  const ColMatrix a = sys.matrix;
  const auto n = a.rows();
  Eigen::VectorXd x;
  bool ok = false;
  if (!use_direct(controls, n)) {
    Eigen::BiCGSTAB<ColMatrix, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(controls.linear_tolerance);
    it.setMaxIterations(controls.linear_max_iterations);
    it.compute(a);
    if (it.info() == Eigen::Success) {
      x = it.solve(sys.rhs);
      ok = it.info() == Eigen::Success && (x.array() > 0.0).all();
    }
    if (!ok && direct_fallbacks) ++*direct_fallbacks;
  }
  if (!ok) x = sparse_lu_solve(a, sys.rhs, "solve_mass");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(x[i] > 0.0))
      throw SolverError("solve_mass: nonpositive density " + std::to_string(x[i]) + " in cell " +
                        std::to_string(i));
  return CellField{std::vector<double>(x.data(), x.data() + n)};
}

MomentumSolver::MomentumSolver(const Discretization& disc, const MomentumSystem& system,
                               const SolverControls& controls)
    : disc_(&disc), system_(&system), controls_(controls) {
  direct_ = use_direct(controls, system.stiffness.rows());
  if (direct_ && system.scalar_stiffness.rows() > 0) {
    ldlt_.compute(ColMatrix(system.scalar_stiffness));
    if (ldlt_.info() != Eigen::Success) throw SolverError("momentum: factorization failed");
    factorized_ = true;
  }
}

Eigen::VectorXd MomentumSolver::solve_block(const Eigen::VectorXd& rhs) {
  if (rhs.size() == 0) return rhs;
  if (!direct_) {
    Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>>
        cg;
    const ColMatrix a(system_->scalar_stiffness);  // cg keeps a reference
    cg.setTolerance(controls_.linear_tolerance);
    cg.setMaxIterations(controls_.linear_max_iterations);
    cg.compute(a);
    Eigen::VectorXd x = cg.solve(rhs);
    if (cg.info() == Eigen::Success) return x;
    ++fallbacks_;
  }
  if (!factorized_) {
    ldlt_.compute(ColMatrix(system_->scalar_stiffness));
    if (ldlt_.info() != Eigen::Success) throw SolverError("momentum: factorization failed");
    factorized_ = true;
  }
  return ldlt_.solve(rhs);
}

VelocityField MomentumSolver::solve(const CellField& p) {
  const int n = disc_->dofs.num_interior();
  const Eigen::Map<const Eigen::VectorXd> pv(p.values.data(), static_cast<Eigen::Index>(p.values.size()));
  const Eigen::VectorXd rhs = system_->load + system_->coupling.transpose() * pv;
  Eigen::VectorXd x(2 * n);
  for (int c = 0; c < 2; ++c) x.segment(c * n, n) = solve_block(rhs.segment(c * n, n));
  const double denom = std::max(rhs.norm(), std::numeric_limits<double>::min());
  last_residual_ = (system_->stiffness * x - rhs).norm() / denom;
  return from_free_vector(*disc_, x);
}

VelocityField solve_momentum(const Discretization& disc, const MomentumSystem& system,
                             const CellField& p, const SolverControls& controls) {
  MomentumSolver s(disc, system, controls);
  return s.solve(p);
}

double combined_residual(const ResidualTriple& r, const MomentumSystem& system,
                         const SchemeParams& params) {
  const double fnorm = system.load.norm();
  const double mom_scale = fnorm > 0.0 ? fnorm : 1.0;
  return r.momentum / mom_scale + r.mass / params.rho_star + r.mass_defect / params.M;
}

namespace {

struct IterationState {
  const Discretization& disc;
  const SchemeParams& params;
  const MomentumSystem& system;
  SolveReport& report;

  double record(int k, const VelocityField& u, const CellField& rho, double damping,
                double min_rho) {
    const ResidualTriple r = nonlinear_residual(disc, system, u, pressure_from_density(rho, params), params);
    const double comb = combined_residual(r, system, params);
    report.history.push_back({k, comb, r, min_rho, damping});
    report.iterations = k;
    report.final_residual = r;
    report.final_combined = comb;
    report.min_rho = std::min(report.min_rho, min_rho);
    return comb;
  }
};

Solution make_solution(VelocityField u, CellField rho, const SchemeParams& params) {
  CellField p = pressure_from_density(rho, params);
  return Solution{std::move(u), std::move(p), std::move(rho), params};
}

}  // namespace

std::pair<Solution, SolveReport> picard_solve(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls) {
  controls.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  report.method = "picard";
  report.min_rho = std::numeric_limits<double>::infinity();
  const MomentumSystem system = assemble_momentum(disc, f, controls.quad_order);
  MomentumSolver momentum(disc, system, controls);
  IterationState state{disc, params, system, report};

  VelocityField u = zero_velocity(disc);
  CellField rho = constant_cell_field(disc, params.rho_star);
  double omega = controls.damping;
  double res = state.record(0, u, rho, omega, min_value(rho));
  double prev = res;
  int increases = 0;
  report.converged = res <= controls.tolerance;
  for (int k = 1; k <= controls.max_iterations && !report.converged; ++k) {
    const CellField rho_tilde =
        solve_mass(disc, u, rho, params, controls, {}, &report.direct_fallbacks);
    for (std::size_t i = 0; i < rho.values.size(); ++i)
      rho.values[i] = (1.0 - omega) * rho.values[i] + omega * rho_tilde.values[i];
    require_finite(rho, k);
    const double mr = min_value(rho);
    if (!(mr > 0.0)) throw SolverError("positivity lost at iteration " + std::to_string(k));
    u = momentum.solve(pressure_from_density(rho, params));
    require_finite(u, k);
    res = state.record(k, u, rho, omega, mr);
    report.converged = res <= controls.tolerance;
    increases = res > prev ? increases + 1 : 0;
    if (increases >= 3 && omega > 1.0 / 16.0) {
      omega = std::max(omega / 2.0, 1.0 / 16.0);
      increases = 0;
    }
    prev = res;
  }
  report.direct_fallbacks += momentum.direct_fallbacks();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {make_solution(std::move(u), std::move(rho), params), std::move(report)};
}

namespace {

// Coupled Jacobian of (momentum residual, genuine mass residual) at (u, rho).
ColMatrix coupled_jacobian(const Discretization& disc, const MomentumSystem& system,
                           const VelocityField& u, const CellField& rho, const SchemeParams& params) {
  const auto& mesh = disc.mesh;
  const int nu = disc.dofs.num_velocity_dofs();
  const int N = static_cast<int>(mesh.num_cells());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(system.stiffness.nonZeros() + 2 * system.coupling.nonZeros() + 12 * mesh.num_edges());
  for (int r = 0; r < system.stiffness.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(system.stiffness, r); it; ++it)
      t.emplace_back(r, it.col(), it.value());
  for (int r = 0; r < system.coupling.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(system.coupling, r); it; ++it)
      t.emplace_back(it.col(), nu + r, -it.value() / params.A);

  const double h_alpha = std::pow(disc.geo.h, params.alpha);
  for (int K = 0; K < N; ++K) t.emplace_back(nu + K, nu + K, h_alpha * disc.geo.cell_measure[K]);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const int E = static_cast<int>(e);
    if (mesh.is_boundary(E)) continue;
    const int K = mesh.edge_cells[e][0], L = mesh.edge_cells[e][1];
    const double rK = rho.values[K], rL = rho.values[L];
    const double v = edge_velocity_flux(disc, u, E, K);
    const double rs = upwind_density(rK, rL, v);
    const int up = v >= 0.0 ? K : L;
    // Flux v * rho_sigma, added to row K and subtracted from row L.
    t.emplace_back(nu + K, nu + up, v);
    t.emplace_back(nu + L, nu + up, -v);
    for (int c = 0; c < 2; ++c) {
      const double dv = disc.geo.edge_measure[e] * disc.geo.edge_normal[e][c] * rs;
      const int col = disc.dofs.velocity_dof(E, c);
      t.emplace_back(nu + K, col, dv);
      t.emplace_back(nu + L, col, -dv);
    }
    // tau |rK + rL| (rK - rL)
    const double tau = stabilization_coefficient(disc, E, params.beta);
    const double s = rK + rL >= 0.0 ? 1.0 : -1.0;
    const double dK = tau * s * ((rK - rL) + (rK + rL));
    const double dL = tau * s * ((rK - rL) - (rK + rL));
    t.emplace_back(nu + K, nu + K, dK);
    t.emplace_back(nu + K, nu + L, dL);
    t.emplace_back(nu + L, nu + K, -dK);
    t.emplace_back(nu + L, nu + L, -dL);
  }
  ColMatrix j(nu + N, nu + N);
  j.setFromTriplets(t.begin(), t.end());
  j.makeCompressed();
  return j;
}

// Positive mass solve for fixed u, iterating the frozen stabilization weight to
// a fixed point. Every iterate is the solution of an M-matrix system.
CellField project_density(const Discretization& disc, const VelocityField& u, CellField rho,
                          const SchemeParams& params, const SolverControls& controls,
                          double& min_rho, int& fallbacks) {
  const double stop = 1e-3 * controls.tolerance * params.rho_star;
  for (int it = 0; it < 100; ++it) {
    CellField next = solve_mass(disc, u, rho, params, controls, {}, &fallbacks);
    min_rho = std::min(min_rho, min_value(next));
    double change = 0.0;
    for (std::size_t i = 0; i < next.values.size(); ++i)
      change = std::max(change, std::abs(next.values[i] - rho.values[i]));
    rho = std::move(next);
    if (change <= stop) break;
  }
  return rho;
}

}  // namespace

std::pair<Solution, SolveReport> newton_solve(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls) {
  controls.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  report.method = "newton";
  report.min_rho = std::numeric_limits<double>::infinity();
  const MomentumSystem system = assemble_momentum(disc, f, controls.quad_order);
  IterationState state{disc, params, system, report};
  const int nu = disc.dofs.num_velocity_dofs();
  const int N = static_cast<int>(disc.mesh.num_cells());

  VelocityField u = zero_velocity(disc);
  CellField rho = constant_cell_field(disc, params.rho_star);
  double res = state.record(0, u, rho, 1.0, min_value(rho));
  report.converged = res <= controls.tolerance;
  for (int k = 1; k <= controls.max_iterations && !report.converged; ++k) {
    const ColMatrix jac = coupled_jacobian(disc, system, u, rho, params);
    Eigen::VectorXd rhs(nu + N);
    {
      const Eigen::VectorXd x = to_free_vector(disc, u);
      const Eigen::Map<const Eigen::VectorXd> rv(rho.values.data(), N);
      rhs.head(nu) = -(system.stiffness * x - system.coupling.transpose() * rv / params.A - system.load);
      const auto rm = mass_row_residuals(disc, u, rho, params);
      for (int K = 0; K < N; ++K) rhs[nu + K] = -rm[K];
    }
    const Eigen::VectorXd delta = sparse_lu_solve(jac, rhs, "newton");
    const Eigen::VectorXd x0 = to_free_vector(disc, u);

    double omega = controls.damping;
    VelocityField u_trial;
    CellField rho_trial;
    double min_rho = std::numeric_limits<double>::infinity();
    double trial_res = 0.0;
    for (;;) {
      u_trial = from_free_vector(disc, x0 + omega * delta.head(nu));
      require_finite(u_trial, k);
      // Start the weight iteration from the Newton density when it stays positive.
      CellField start = rho;
      bool positive = true;
      for (int K = 0; K < N && positive; ++K) {
        start.values[K] = rho.values[K] + omega * delta[nu + K];
        positive = start.values[K] > 0.0;
      }
      if (!positive) start = rho;
      min_rho = std::numeric_limits<double>::infinity();
      rho_trial = project_density(disc, u_trial, start, params, controls, min_rho,
                                  report.direct_fallbacks);
      require_finite(rho_trial, k);
      const ResidualTriple r = nonlinear_residual(disc, system, u_trial,
                                                  pressure_from_density(rho_trial, params), params);
      trial_res = combined_residual(r, system, params);
      if (trial_res < res || omega <= 1.0 / 64.0) break;
      omega /= 2.0;
    }
    u = std::move(u_trial);
    rho = std::move(rho_trial);
    res = state.record(k, u, rho, omega, min_rho);
    report.converged = res <= controls.tolerance;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {make_solution(std::move(u), std::move(rho), params), std::move(report)};
}

std::pair<Solution, SolveReport> solve_scheme(const Discretization& disc, const SchemeParams& params,
                                              const VectorFn& f, const SolverControls& controls) {
  return controls.method == NonlinearMethod::Picard ? picard_solve(disc, params, f, controls)
                                                    : newton_solve(disc, params, f, controls);
}

}  // namespace crstokes
