#pragma once

#include "crstokes/rates.hpp"
#include "crstokes/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crstokes {

struct AuditEntry {
  std::string check;
  /// The identity or estimate being measured.
  std::string anchor;
  std::string comparison;
  /// Measured values; for family checks one value per refinement level.
  std::vector<double> values;
  /// Ratio of each level's value to the coarsest one (empty for single-mesh checks).
  std::vector<double> trend;
  bool pass = false;
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  bool pass() const;
  void add(AuditEntry e) { entries.push_back(std::move(e)); }
};

/// max over cells of |int_K div_h(r_h v) - int_K div v|, the cell integral of
/// div v taken with a `quad_order` Duffy rule.
AuditEntry check_divergence_preservation(const Discretization& disc, const SmoothVectorField& v,
                                         int quad_order, double tol = 1e-12);

struct InterpRates {
  std::vector<double> h;
  std::vector<double> l2;
  std::vector<double> h1b;
  LogLogFit fit_l2;
  LogLogFit fit_h1b;
  bool fitted = false;  // false when the errors vanish (affine v)
};

/// ||v - r_h v||_L2 and |v - r_h v|_{1,h} per level. At least three meshes.
InterpRates interpolation_errors(const std::vector<Mesh>& meshes, const SmoothScalarField& v,
                                 int quad_order = 5);
/// Slopes 2 +- 0.2 and 1 +- 0.2 with R^2 >= 0.98.
AuditEntry check_interp_rates(const std::vector<Mesh>& meshes, const SmoothScalarField& v);

struct InequalityConstants {
  double jump_ratio = 0.0;        // max sum_sigma int_sigma [v]^2 / |v|_{1,h}^2 over samples
  double jump_bound = 0.0;        // explicit constant max_K sum c_sigma h_sigma |sigma| / |K|
  double trace_ratio = 0.0;       // max ||v||_sigma / ((d|sigma|/|K|)^1/2 (||v||_K + h_K ||grad v||_K))
  double poincare_ratio = 0.0;    // max ||v - m_K v||_K / (h_K / pi ||grad v||_K)
  double pairing_constant = 0.0;  // max sum |int a [v] f| / (h |v|_{1,h} |f|_1)
};

InequalityConstants measure_inequalities(const Discretization& disc, int n_random, std::uint64_t seed);
/// Entries for the jump, trace, Poincare and pairing bounds on one mesh.
std::vector<AuditEntry> check_inequalities(const Discretization& disc, int n_random, std::uint64_t seed);

struct TranslateResult {
  double norm = 0.0;
  /// norm^2 / (|eta| (|eta| + h) |v|_{1,h}^2); 0 when the denominator vanishes.
  double constant = 0.0;
};

/// Midpoint sampling of ||v~(. + eta) - v~||_L2 with v~ the extension by zero.
TranslateResult translate_norm(const Discretization& disc, const CRFunction& v, const Vec2& eta,
                               int resolution = 256);

/// sqrt of the smallest eigenvalue of B A^-1 B^T against the pressure mass
/// matrix on mean-zero pressures. Dense; meant for small meshes.
double infsup_constant(const Discretization& disc);

struct EntropyBreakdown {
  double T1 = 0.0;
  double T1_reordered = 0.0;
  double T2 = 0.0;
  double T3 = 0.0;
  double pdivu = 0.0;
  double seminorm_sq = 0.0;
  /// A^-1 h^alpha sum |K| (rho_K log rho_K - rho* log rho*).
  double T2_lower = 0.0;
  /// A^-1 |rho|_disc^2.
  double T3_lower = 0.0;
  double tolerance = 0.0;

  double sum() const { return T1 + T2 + T3; }
  double slack_T1() const { return T1 - pdivu; }
  double slack_T2() const { return T2 - T2_lower; }
  double slack_T3() const { return T3 - T3_lower; }
  bool pass() const;
};

/// Throws invalid_argument when some rho_K <= 0.
EntropyBreakdown audit_entropy(const Discretization& disc, const Solution& sol, double tolerance);

/// (a - b) / (log a - log b), a when a == b.
double log_mean_bracket(double rho_K, double rho_L);

struct TestFunction {
  std::string name;
  SmoothScalarField scalar;
};

/// Bump (x(1-x)y(1-y))^2 times {1, sin 2pi x, sin 2pi y, cos pi x cos pi y, sin pi(x+y)}.
std::vector<TestFunction> default_psi_family();

struct WeakResidual {
  std::string name;
  double R1 = 0.0;  // max over psi = (phi, 0), (0, phi)
  double R2 = 0.0;
};

/// R1 = |int grad_h u : grad psi - p div psi - f . psi|, R2 = |int p u . grad phi|
/// for each scalar phi of the family (psi = phi e_i for R1).
std::vector<WeakResidual> weak_residuals(const Discretization& disc, const Solution& sol,
                                         const VectorFn& f, const std::vector<TestFunction>& family,
                                         int quad_order = 5);

/// Every value within `factor` of the first.
bool bounded_trend(const std::vector<double>& values, double factor, std::vector<double>* ratios = nullptr);
/// Each value at most (1 + slack) times its predecessor.
bool decreasing_with_slack(const std::vector<double>& values, double slack);

}  // namespace crstokes
