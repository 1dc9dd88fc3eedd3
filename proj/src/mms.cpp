#include "crstokes/mms.hpp"

#include "crstokes/dual.hpp"
#include "crstokes/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace crstokes {
namespace {

constexpr double kPi = std::numbers::pi;

struct CaseData {
  int mode;
  double A;
  double p_m;
  double amplitude;
};

template <class T>
T stream(const T& x, const T& y, const CaseData& c) {
  using std::sin;
  const T b = x * (1.0 - x) * y * (1.0 - y);
  T psi = c.amplitude * b * b;
  if (c.mode > 0) {
    const double k = c.mode * kPi;
    psi = psi * (1.0 + 0.5 * sin(k * x) * sin(k * y));
  }
  return psi;
}

template <class T>
T pressure(const T& x, const T& y, const CaseData& c) {
  using std::cos;
  if (c.mode == 0) return T(c.p_m);
  const double k = c.mode * kPi;
  return c.p_m * (1.0 + 0.25 * cos(k * x) * cos(k * y));
}

/// curl psi0 = (d_y psi0, -d_x psi0).
template <class T>
std::array<T, 2> momentum(const T& x, const T& y, const CaseData& c) {
  const Dual<T> X(x, T(1.0), T(0.0));
  const Dual<T> Y(y, T(0.0), T(1.0));
  const Dual<T> s = stream(X, Y, c);
  return {s.d[1], -s.d[0]};
}

template <class T>
std::array<T, 2> velocity(const T& x, const T& y, const CaseData& c) {
  const auto m = momentum(x, y, c);
  const T rho = c.A * pressure(x, y, c);
  return {m[0] / rho, m[1] / rho};
}

Mat2 velocity_jacobian(const Point& x, const CaseData& c) {
  const auto u = velocity(variable<Dual1>(x.x(), 0), variable<Dual1>(x.y(), 1), c);
  Mat2 J;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) J(i, j) = u[i].d[j];
  return J;
}

Vec2 velocity_laplacian(const Point& x, const CaseData& c) {
  const auto u = velocity(variable<Dual2>(x.x(), 0), variable<Dual2>(x.y(), 1), c);
  return {u[0].d[0].d[0] + u[0].d[1].d[1], u[1].d[0].d[0] + u[1].d[1].d[1]};
}

Vec2 pressure_gradient(const Point& x, const CaseData& c) {
  const auto p = pressure(variable<Dual1>(x.x(), 0), variable<Dual1>(x.y(), 1), c);
  return {p.d[0], p.d[1]};
}

double div_rho_u(const Point& x, const CaseData& c) {
  const Dual1 X = variable<Dual1>(x.x(), 0), Y = variable<Dual1>(x.y(), 1);
  const auto u = velocity(X, Y, c);
  const Dual1 rho = c.A * pressure(X, Y, c);
  return (rho * u[0]).d[0] + (rho * u[1]).d[1];
}

double tensor_integral(const ScalarFn& g, int n) {
  const auto rule = gauss_legendre(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s += rule.weights[i] * rule.weights[j] * g(Point(rule.points[i], rule.points[j]));
  return s;
}

}  // namespace

ManufacturedCase stream_function_case(double A, double M, int mode, double amplitude) {
  if (!(A > 0.0) || !(M > 0.0)) throw std::invalid_argument("stream_function_case: A and M must be positive");
  if (mode < 0) throw std::invalid_argument("stream_function_case: mode must be >= 0");
  if (!std::isfinite(amplitude)) throw std::invalid_argument("stream_function_case: bad amplitude");

  const CaseData c{mode, A, M / A, amplitude};
  ManufacturedCase mc;
  mc.mode = mode;
  mc.A = A;
  mc.M = M;
  mc.amplitude = amplitude;
  mc.domain_measure = 1.0;

  mc.u.value = [c](const Point& x) {
    const auto u = velocity(x.x(), x.y(), c);
    return Vec2(u[0], u[1]);
  };
  mc.u.jacobian = [c](const Point& x) { return velocity_jacobian(x, c); };
  mc.p.value = [c](const Point& x) { return pressure(x.x(), x.y(), c); };
  mc.p.gradient = [c](const Point& x) { return pressure_gradient(x, c); };
  mc.rho = [c](const Point& x) { return c.A * pressure(x.x(), x.y(), c); };
  mc.momentum = [c](const Point& x) {
    const auto m = momentum(x.x(), x.y(), c);
    return Vec2(m[0], m[1]);
  };
  mc.div_momentum = [c](const Point& x) { return div_rho_u(x, c); };
  mc.laplacian_u = [c](const Point& x) { return velocity_laplacian(x, c); };
  mc.f = [c](const Point& x) -> Vec2 { return -velocity_laplacian(x, c) + pressure_gradient(x, c); };

  // p >= 0.75 p_m by construction; sample anyway so a future shape change cannot slip through.
  double pmin = INFINITY;
  for (int i = 0; i <= 32; ++i)
    for (int j = 0; j <= 32; ++j) pmin = std::min(pmin, mc.p.value(Point(i / 32.0, j / 32.0)));
  if (!(pmin > 0.5 * c.p_m))
    throw std::invalid_argument("stream_function_case: pressure not bounded away from zero");

  const double mass = tensor_integral(mc.rho, 12);
  if (std::abs(mass - M) > 1e-12 * M)
    throw std::invalid_argument("stream_function_case: total mass check failed");
  return mc;
}

VectorFn finite_difference_forcing(const ManufacturedCase& mc, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_forcing: step must be positive");
  auto u = mc.u.value;
  auto p = mc.p.value;
  return [u, p, step](const Point& x) -> Vec2 {
    const double h = step;
    Vec2 lap = Vec2::Zero();
    Vec2 gp;
    for (int d = 0; d < 2; ++d) {
      Vec2 e = Vec2::Zero();
      e[d] = h;
      lap += (-u(x + 2 * e) + 16.0 * u(x + e) - 30.0 * u(x) + 16.0 * u(x - e) - u(x - 2 * e)) /
             (12.0 * h * h);
      gp[d] = (-p(x + 2 * e) + 8.0 * p(x + e) - 8.0 * p(x - e) + p(x - 2 * e)) / (12.0 * h);
    }
    return -lap + gp;
  };
}

ErrorSet compute_errors(const Discretization& disc, const Solution& sol, const ManufacturedCase& mc,
                        int quad_order) {
  const Mesh& mesh = disc.mesh;
  const auto grads = broken_gradient(disc, sol.u);
  ErrorSet e;
  double h1 = 0.0, l2 = 0.0, pl2 = 0.0;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = mesh.cells[k];
    const int K = static_cast<int>(k);
    const auto rule = triangle_rule(mesh.vertices[c[0]], mesh.vertices[c[1]], mesh.vertices[c[2]],
                                    quad_order);
    double pmean = 0.0;
    for (const auto& q : rule) {
      const Mat2 dJ = grads[k] - mc.u.jacobian(q.x);
      h1 += q.weight * dJ.squaredNorm();
      l2 += q.weight * (evaluate(disc, sol.u, K, q.x) - mc.u.value(q.x)).squaredNorm();
      pmean += q.weight * mc.p.value(q.x);
    }
    const double area = disc.geo.cell_measure[k];
    pmean /= area;
    const double dp = sol.p.values[k] - pmean;
    pl2 += area * dp * dp;
  }
  e.u_h1b = std::sqrt(h1);
  e.u_l2 = std::sqrt(l2);
  e.p_l2 = std::sqrt(pl2);

  VelocityField diff = interpolate_rh(disc, mc.u.value, 8);
  for (int d = 0; d < 2; ++d)
    for (std::size_t s = 0; s < diff.components[d].values.size(); ++s)
      diff.components[d].values[s] = sol.u.components[d].values[s] - diff.components[d].values[s];
  e.u_h1b_interp = broken_h1_seminorm(disc, diff);
  return e;
}

namespace {

struct LevelResult {
  std::unique_ptr<Discretization> disc;
  Solution sol;
  SolveReport report;
  StudyLevel row;
};

std::optional<LogLogFit> fit_column(const std::vector<StudyLevel>& rows, const std::vector<int>& used,
                                    double ErrorSet::*field) {
  if (used.size() < 3) return std::nullopt;
  std::vector<double> h, err;
  for (int i : used) {
    const double v = rows[i].errors.*field;
    if (!(v > 0.0)) return std::nullopt;
    h.push_back(rows[i].h);
    err.push_back(v);
  }
  return fit_loglog(h, err);
}

}  // namespace

RateTable convergence_study(const ManufacturedCase& mc, const Mesh& base, int levels, double alpha,
                            double beta, const SolverControls& controls, const LevelCallback& on_level,
                            int max_threads) {
  if (levels < 3) throw std::invalid_argument("convergence_study: need at least 3 levels");
  controls.validate();

  std::vector<Mesh> meshes{base};
  for (int l = 1; l < levels; ++l) meshes.push_back(refine_uniform(meshes.back()));

  std::vector<LevelResult> results(levels);
  auto run_level = [&](int l) {
    const auto start = std::chrono::steady_clock::now();
    auto& r = results[l];
    r.disc = std::make_unique<Discretization>(meshes[l]);
    const auto params = SchemeParams::make(mc.A, mc.M, alpha, beta, r.disc->geo.domain_measure);
    auto [sol, report] = solve_scheme(*r.disc, params, mc.f, controls);
    r.sol = std::move(sol);
    r.report = std::move(report);
    r.row.level = l;
    r.row.h = r.disc->geo.h;
    r.row.cells = static_cast<int>(r.disc->mesh.num_cells());
    r.row.velocity_dofs = r.disc->dofs.num_velocity_dofs();
    r.row.errors = compute_errors(*r.disc, r.sol, mc);
    r.row.converged = r.report.converged;
    r.row.iterations = r.report.iterations;
    r.row.min_rho = r.report.min_rho;
    r.row.final_residual = r.report.final_combined;
    r.row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const int threads = std::clamp(max_threads, 1, levels);
  if (threads == 1) {
    for (int l = 0; l < levels; ++l) run_level(l);
  } else {
    // Largest levels first so the long solve starts immediately.
    std::atomic<int> next{levels - 1};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int l = next--; l >= 0; l = next--) run_level(l);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RateTable table;
  for (int l = 0; l < levels; ++l) {
    table.levels.push_back(results[l].row);
    if (results[l].row.converged) table.levels_used.push_back(l);
    if (on_level) on_level(l, *results[l].disc, results[l].sol, results[l].report);
  }
  table.slope_u_h1b = fit_column(table.levels, table.levels_used, &ErrorSet::u_h1b);
  table.slope_u_h1b_interp = fit_column(table.levels, table.levels_used, &ErrorSet::u_h1b_interp);
  table.slope_u_l2 = fit_column(table.levels, table.levels_used, &ErrorSet::u_l2);
  table.slope_p_l2 = fit_column(table.levels, table.levels_used, &ErrorSet::p_l2);
  return table;
}

void write_rate_csv(std::ostream& os, const RateTable& table) {
  const auto old = os.precision(17);
  os << "level,h,err_u_h1b,err_u_l2,err_p_l2\n";
  for (const auto& r : table.levels) {
    os << r.level << ',' << r.h << ',' << r.errors.u_h1b << ',' << r.errors.u_l2 << ','
       << r.errors.p_l2 << '\n';
  }
  auto slope = [&](const char* name, const std::optional<LogLogFit>& fit) {
    if (fit) os << "# slope_" << name << '=' << fit->slope << " r2=" << fit->r_squared << '\n';
    else os << "# slope_" << name << "=nan\n";
  };
  slope("u_h1b", table.slope_u_h1b);
  slope("u_l2", table.slope_u_l2);
  slope("p_l2", table.slope_p_l2);
  for (const auto& r : table.levels)
    if (!r.converged) os << "# level " << r.level << " not converged\n";
  os.precision(old);
}

}  // namespace crstokes
