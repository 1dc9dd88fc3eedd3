#include "crstokes/analysis.hpp"

#include "crstokes/dual.hpp"
#include "crstokes/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace crstokes {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<QuadPoint> cell_rule(const Mesh& mesh, int K, int n) {
  const auto& c = mesh.cells[K];
  return triangle_rule(mesh.vertices[c[0]], mesh.vertices[c[1]], mesh.vertices[c[2]], n);
}

std::vector<QuadPoint> edge_rule(const Mesh& mesh, int e, int n) {
  const auto& ed = mesh.edges[e];
  return segment_rule(mesh.vertices[ed[0]], mesh.vertices[ed[1]], n);
}

double sq(double x) { return x * x; }

}  // namespace

bool AuditReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.pass; });
}

bool bounded_trend(const std::vector<double>& values, double factor, std::vector<double>* ratios) {
  if (values.empty()) return true;
  bool ok = std::isfinite(values.front());
  if (ratios) ratios->clear();
  for (double v : values) {
    const double r = values.front() != 0.0 ? v / values.front() : (v == 0.0 ? 1.0 : INFINITY);
    if (ratios) ratios->push_back(r);
    if (!(r <= factor)) ok = false;
  }
  return ok;
}

bool decreasing_with_slack(const std::vector<double>& values, double slack) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] <= (1.0 + slack) * values[i - 1])) return false;
  return true;
}

AuditEntry check_divergence_preservation(const Discretization& disc, const SmoothVectorField& v,
                                         int quad_order, double tol) {
  const auto rv = interpolate_rh(disc, v.value, std::max(3, quad_order));
  const auto div = broken_divergence(disc, rv);
  double worst = 0.0;
  for (std::size_t k = 0; k < disc.mesh.num_cells(); ++k) {
    double exact = 0.0;
    for (const auto& q : cell_rule(disc.mesh, static_cast<int>(k), quad_order))
      exact += q.weight * v.jacobian(q.x).trace();
    worst = std::max(worst, std::abs(div[k] * disc.geo.cell_measure[k] - exact));
  }
  AuditEntry e;
  e.check = "divergence_preservation";
  e.anchor = "int_K div_h(r_h v) = int_K div v";
  e.comparison = "max_K mismatch <= " + std::to_string(tol);
  e.values = {worst};
  e.pass = worst <= tol;
  return e;
}

InterpRates interpolation_errors(const std::vector<Mesh>& meshes, const SmoothScalarField& v,
                                 int quad_order) {
  if (meshes.size() < 3) throw std::invalid_argument("interpolation_errors: need at least 3 meshes");
  InterpRates out;
  for (const auto& m : meshes) {
    const Discretization disc(m);
    const auto rv = interpolate_rh(disc, v.value, 4);
    const auto g = broken_gradient(disc, rv);
    double l2 = 0.0, h1 = 0.0;
    for (std::size_t k = 0; k < m.num_cells(); ++k) {
      for (const auto& q : cell_rule(m, static_cast<int>(k), quad_order)) {
        l2 += q.weight * sq(v.value(q.x) - evaluate(disc, rv, static_cast<int>(k), q.x));
        h1 += q.weight * (v.gradient(q.x) - g[k]).squaredNorm();
      }
    }
    out.h.push_back(disc.geo.h);
    out.l2.push_back(std::sqrt(l2));
    out.h1b.push_back(std::sqrt(h1));
  }
  const double biggest = std::max(*std::max_element(out.l2.begin(), out.l2.end()),
                                  *std::max_element(out.h1b.begin(), out.h1b.end()));
  if (biggest > 1e-13) {
    out.fit_l2 = fit_loglog(out.h, out.l2);
    out.fit_h1b = fit_loglog(out.h, out.h1b);
    out.fitted = true;
  }
  return out;
}

AuditEntry check_interp_rates(const std::vector<Mesh>& meshes, const SmoothScalarField& v) {
  const auto r = interpolation_errors(meshes, v);
  AuditEntry e;
  e.check = "interpolation_rates";
  e.anchor = "||v - r_h v|| = O(h^2), |v - r_h v|_1h = O(h)";
  e.comparison = "L2 slope in [1.8, 2.2], H1 slope in [0.8, 1.2], R^2 >= 0.98";
  e.values = r.h1b;
  if (!r.fitted) {
    e.pass = true;
    return e;
  }
  e.values.insert(e.values.end(), {r.fit_l2.slope, r.fit_h1b.slope});
  e.pass = std::abs(r.fit_l2.slope - 2.0) <= 0.2 && std::abs(r.fit_h1b.slope - 1.0) <= 0.2 &&
           r.fit_l2.r_squared >= 0.98 && r.fit_h1b.r_squared >= 0.98;
  return e;
}

namespace {

/// f = x(1-x)y(1-y) (c0 + c1 sin(pi (k1 x + k2 y) + phase)), in H^1_0 of the unit square.
struct RandomSmooth {
  double c0, c1, k1, k2, phase;

  template <class T>
  T operator()(const T& x, const T& y) const {
    using std::sin;
    return x * (1.0 - x) * y * (1.0 - y) * (c0 + c1 * sin(kPi * (k1 * x + k2 * y) + phase));
  }
  double value(const Point& p) const { return (*this)(p.x(), p.y()); }
  Vec2 gradient(const Point& p) const {
    const auto r = (*this)(variable<Dual1>(p.x(), 0), variable<Dual1>(p.y(), 1));
    return {r.d[0], r.d[1]};
  }
};

}  // namespace

InequalityConstants measure_inequalities(const Discretization& disc, int n_random, std::uint64_t seed) {
  if (n_random < 1) throw std::invalid_argument("measure_inequalities: n_random must be >= 1");
  const Mesh& m = disc.mesh;
  const auto& g = disc.geo;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> wave(1, 3);

  InequalityConstants c;
  for (std::size_t k = 0; k < m.num_cells(); ++k) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int e = m.cell_edges[k][i];
      s += (m.is_boundary(e) ? 1.0 : 2.0) * g.edge_diameter[e] * g.edge_measure[e];
    }
    c.jump_bound = std::max(c.jump_bound, s / g.cell_measure[k]);
  }

  for (int sample = 0; sample < n_random; ++sample) {
    CRFunction v = zero_cr(disc);
    for (int e : disc.dofs.interior_to_edge) v.values[e] = unit(rng);
    const double vb = broken_h1_seminorm(disc, v);
    if (!(vb > 0.0)) continue;
    const auto grad = broken_gradient(disc, v);

    const auto jumps = edge_jump_integrals(disc, v);
    double jump_sum = 0.0;
    for (std::size_t e = 0; e < m.num_edges(); ++e) jump_sum += jumps[e].square_integral / g.edge_diameter[e];
    c.jump_ratio = std::max(c.jump_ratio, jump_sum / (vb * vb));

    for (std::size_t k = 0; k < m.num_cells(); ++k) {
      const int K = static_cast<int>(k);
      const auto rule = cell_rule(m, K, 2);
      double vK = 0.0, dev = 0.0;
      for (const auto& q : rule) {
        vK += q.weight * sq(evaluate(disc, v, K, q.x));
        dev += q.weight * sq(grad[k].dot(q.x - g.cell_centroid[k]));
      }
      vK = std::sqrt(vK);
      const double gK = grad[k].norm() * std::sqrt(g.cell_measure[k]);
      if (gK > 0.0)
        c.poincare_ratio = std::max(c.poincare_ratio, std::sqrt(dev) / (g.cell_diameter[k] / kPi * gK));
      for (int i = 0; i < 3; ++i) {
        const int e = m.cell_edges[k][i];
        double vs = 0.0;
        for (const auto& q : edge_rule(m, e, 2)) vs += q.weight * sq(evaluate(disc, v, K, q.x));
        const double rhs = std::sqrt(2.0 * g.edge_measure[e] / g.cell_measure[k]) *
                           (vK + g.cell_diameter[k] * gK);
        if (rhs > 0.0) c.trace_ratio = std::max(c.trace_ratio, std::sqrt(vs) / rhs);
      }
    }

    const RandomSmooth f{unit(rng), unit(rng), double(wave(rng)), double(wave(rng)), kPi * unit(rng)};
    double f1 = 0.0;
    for (std::size_t k = 0; k < m.num_cells(); ++k)
      for (const auto& q : cell_rule(m, static_cast<int>(k), 5)) f1 += q.weight * f.gradient(q.x).squaredNorm();
    f1 = std::sqrt(f1);
    double pairing = 0.0;
    for (int e : disc.dofs.interior_to_edge) {
      const int K = m.edge_cells[e][0], L = m.edge_cells[e][1];
      double s = 0.0;
      for (const auto& q : edge_rule(m, e, 4))
        s += q.weight * (evaluate(disc, v, K, q.x) - evaluate(disc, v, L, q.x)) * f.value(q.x);
      pairing += std::abs(unit(rng) * s);
    }
    if (f1 > 0.0) c.pairing_constant = std::max(c.pairing_constant, pairing / (g.h * vb * f1));
  }
  return c;
}

std::vector<AuditEntry> check_inequalities(const Discretization& disc, int n_random, std::uint64_t seed) {
  const auto c = measure_inequalities(disc, n_random, seed);
  const double eps = 1e-12;
  std::vector<AuditEntry> out(4);
  out[0] = {"jump_bound", "sum h_sigma^-1 int [v]^2 <= c |v|_1h^2",
            "sampled ratio <= max_K sum c_sigma h_sigma |sigma| / |K|", {c.jump_ratio, c.jump_bound}, {},
            c.jump_ratio <= c.jump_bound * (1.0 + eps)};
  out[1] = {"trace", "||v||_sigma <= (d|sigma|/|K|)^1/2 (||v||_K + h_K ||grad v||_K)",
            "max ratio <= 1", {c.trace_ratio}, {}, c.trace_ratio <= 1.0 + eps};
  out[2] = {"poincare", "||v - v_mK||_K <= h_K / pi ||grad v||_K", "max ratio <= 1",
            {c.poincare_ratio}, {}, c.poincare_ratio <= 1.0 + eps};
  out[3] = {"jump_pairing", "sum |int a [v] f| <= c h |v|_1h |f|_1", "empirical c finite",
            {c.pairing_constant}, {}, std::isfinite(c.pairing_constant)};
  return out;
}

TranslateResult translate_norm(const Discretization& disc, const CRFunction& v, const Vec2& eta,
                               int resolution) {
  if (resolution < 64) throw std::invalid_argument("translate_norm: resolution must be >= 64");
  const Mesh& m = disc.mesh;
  Vec2 lo = m.vertices.front(), hi = m.vertices.front();
  for (const auto& p : m.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Points x with x or x + eta inside the mesh.
  lo = lo.cwiseMin(lo - eta);
  hi = hi.cwiseMax(hi - eta);
  const Vec2 span = hi - lo;
  if (!(span.x() > 0.0) || !(span.y() > 0.0))
    throw std::invalid_argument("translate_norm: degenerate bounding box");

  const PointLocator locator(m, disc.geo);
  auto extended = [&](const Point& x) {
    const int K = locator.locate(x);
    return K == kNoCell ? 0.0 : evaluate(disc, v, K, x);
  };
  const double dx = span.x() / resolution, dy = span.y() / resolution;
  double s = 0.0;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const Point x(lo.x() + (i + 0.5) * dx, lo.y() + (j + 0.5) * dy);
      s += sq(extended(x + eta) - extended(x));
    }
  }
  TranslateResult r;
  r.norm = std::sqrt(s * dx * dy);
  const double vb = broken_h1_seminorm(disc, v);
  const double denom = eta.norm() * (eta.norm() + disc.geo.h) * vb * vb;
  r.constant = denom > 0.0 ? r.norm * r.norm / denom : 0.0;
  return r;
}

double infsup_constant(const Discretization& disc) {
  const int nc = static_cast<int>(disc.mesh.num_cells());
  if (nc < 2) throw std::invalid_argument("infsup_constant: need at least two cells");
  const auto sys = assemble_momentum(disc);
  Eigen::SparseMatrix<double> A = sys.stiffness;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("infsup_constant: stiffness factorization failed");
  const Eigen::MatrixXd Bt = Eigen::MatrixXd(sys.coupling).transpose();
  const Eigen::MatrixXd X = ldlt.solve(Bt);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("infsup_constant: stiffness solve failed");
  Eigen::MatrixXd S = Bt.transpose() * X;

  Eigen::VectorXd isq(nc), w(nc);
  for (int k = 0; k < nc; ++k) {
    isq[k] = 1.0 / std::sqrt(disc.geo.cell_measure[k]);
    w[k] = std::sqrt(disc.geo.cell_measure[k]);
  }
  S = isq.asDiagonal() * S * isq.asDiagonal();
  // Orthonormal basis of the complement of the constant pressure mode.
  w.normalize();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(nc, nc);
  const Eigen::MatrixXd Q2 = Q.rightCols(nc - 1);
  const Eigen::MatrixXd R = Q2.transpose() * S * Q2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (R + R.transpose()), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("infsup_constant: eigensolver failed");
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 0.0))
    throw std::runtime_error("infsup_constant: smallest eigenvalue " + std::to_string(lmin) +
                             " is not positive");
  return std::sqrt(lmin);
}

bool EntropyBreakdown::pass() const {
  return slack_T1() >= -tolerance && slack_T2() >= -tolerance && slack_T3() >= -tolerance &&
         std::abs(sum()) <= tolerance;
}

double log_mean_bracket(double rho_K, double rho_L) {
  if (!(rho_K > 0.0) || !(rho_L > 0.0))
    throw std::invalid_argument("log_mean_bracket: arguments must be positive");
  if (rho_K == rho_L) return rho_K;
  const double lo = std::min(rho_K, rho_L), hi = std::max(rho_K, rho_L);
  const double t = hi / lo - 1.0;
  const double r = lo * (t / std::log1p(t));
  if (!(r >= lo && r <= hi)) throw std::logic_error("log_mean_bracket: result outside [min, max]");
  return r;
}

EntropyBreakdown audit_entropy(const Discretization& disc, const Solution& sol, double tolerance) {
  const Mesh& m = disc.mesh;
  const auto& g = disc.geo;
  const auto& prm = sol.params;
  const auto& rho = sol.rho.values;
  for (double r : rho)
    if (!(r > 0.0)) throw std::invalid_argument("audit_entropy: density must be positive");

  EntropyBreakdown b;
  b.tolerance = tolerance;
  const double invA = 1.0 / prm.A;
  const auto div = broken_divergence(disc, sol.u);

  std::vector<double> cell_flux(m.num_cells(), 0.0);
  double upwind_excess = 0.0;
  for (int e : disc.dofs.interior_to_edge) {
    const int K = m.edge_cells[e][0], L = m.edge_cells[e][1];
    const double v = edge_velocity_flux(disc, sol.u, e, K);
    const double rs = upwind_density(rho[K], rho[L], v);
    cell_flux[K] += v * rs;
    cell_flux[L] -= v * rs;
    const double dlog = std::log(rho[K]) - std::log(rho[L]);
    upwind_excess += v * (rs - log_mean_bracket(rho[K], rho[L])) * dlog;

    const double tau = stabilization_coefficient(disc, e, prm.beta);
    b.T3 += tau * (rho[K] + rho[L]) * (rho[K] - rho[L]) * dlog;
  }
  const double ha = std::pow(g.h, prm.alpha);
  for (std::size_t k = 0; k < m.num_cells(); ++k) {
    const double lr = std::log(rho[k]);
    b.T1 += lr * cell_flux[k];
    b.pdivu += sol.p.values[k] * div[k] * g.cell_measure[k];
    b.T2 += g.cell_measure[k] * (1.0 + lr) * (rho[k] - prm.rho_star);
    b.T2_lower += g.cell_measure[k] * (rho[k] * lr - prm.rho_star * std::log(prm.rho_star));
  }
  b.T1 *= invA;
  b.T1_reordered = b.pdivu + invA * upwind_excess;
  b.T2 *= invA * ha;
  b.T2_lower *= invA * ha;
  b.T3 *= invA;
  b.seminorm_sq = sq(discrete_rho_seminorm(disc, sol.rho, prm.beta));
  b.T3_lower = invA * b.seminorm_sq;
  return b;
}

namespace {

template <class T>
T bump_member(const T& x, const T& y, int which) {
  using std::cos, std::sin;
  const T b = x * (1.0 - x) * y * (1.0 - y);
  const T bb = b * b;
  switch (which) {
    case 0: return bb;
    case 1: return bb * sin(2.0 * kPi * x);
    case 2: return bb * sin(2.0 * kPi * y);
    case 3: return bb * cos(kPi * x) * cos(kPi * y);
    default: return bb * sin(kPi * (x + y));
  }
}

}  // namespace

std::vector<TestFunction> default_psi_family() {
  const char* names[] = {"bump", "bump_sin2pix", "bump_sin2piy", "bump_cospix_cospiy", "bump_sinpixy"};
  std::vector<TestFunction> out;
  for (int i = 0; i < 5; ++i) {
    TestFunction t;
    t.name = names[i];
    t.scalar.value = [i](const Point& p) { return bump_member(p.x(), p.y(), i); };
    t.scalar.gradient = [i](const Point& p) {
      const auto r = bump_member(variable<Dual1>(p.x(), 0), variable<Dual1>(p.y(), 1), i);
      return Vec2(r.d[0], r.d[1]);
    };
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<WeakResidual> weak_residuals(const Discretization& disc, const Solution& sol,
                                         const VectorFn& f, const std::vector<TestFunction>& family,
                                         int quad_order) {
  const Mesh& m = disc.mesh;
  const auto grad = broken_gradient(disc, sol.u);
  std::vector<WeakResidual> out;
  for (const auto& t : family) {
    Vec2 r1 = Vec2::Zero();
    double r2 = 0.0;
    for (std::size_t k = 0; k < m.num_cells(); ++k) {
      const int K = static_cast<int>(k);
      const double p = sol.p.values[k];
      for (const auto& q : cell_rule(m, K, quad_order)) {
        const double phi = t.scalar.value(q.x);
        const Vec2 gphi = t.scalar.gradient(q.x);
        const Vec2 fq = f ? f(q.x) : Vec2::Zero();
        for (int i = 0; i < 2; ++i)
          r1[i] += q.weight * (grad[k].row(i).dot(gphi) - p * gphi[i] - fq[i] * phi);
        r2 += q.weight * p * evaluate(disc, sol.u, K, q.x).dot(gphi);
      }
    }
    out.push_back({t.name, r1.cwiseAbs().maxCoeff(), std::abs(r2)});
  }
  return out;
}

}  // namespace crstokes
