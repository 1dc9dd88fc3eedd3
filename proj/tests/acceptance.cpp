// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "crstokes/analysis.hpp"
#include "crstokes/mms.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>

using namespace crstokes;

namespace {

constexpr double kPi = std::numbers::pi;

struct Criterion {
  int id;
  std::string name;
  bool pass = true;
  std::string detail;
};

std::vector<Criterion> results;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  results.push_back({id, name, pass, detail});
  std::printf("%s %2d %-22s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<Mesh> family(const Mesh& base, int levels) {
  std::vector<Mesh> out{base};
  while (static_cast<int>(out.size()) < levels) out.push_back(refine_uniform(out.back()));
  return out;
}

SmoothScalarField sine_field() {
  return {[](const Point& p) { return std::sin(kPi * p.x()) * std::sin(kPi * p.y()); },
          [](const Point& p) {
            return Vec2(kPi * std::cos(kPi * p.x()) * std::sin(kPi * p.y()),
                        kPi * std::sin(kPi * p.x()) * std::cos(kPi * p.y()));
          }};
}

int threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Sign conditions plus dense inverse on small systems, straight from the matrix.
struct MassSystemTally {
  std::mutex lock;
  long systems = 0;
  long dense_checked = 0;
  long sign_failures = 0;
  long inverse_failures = 0;
  double worst_inverse_ratio = INFINITY;

  void operator()(const SparseSystem& s) {
    const Eigen::MatrixXd M(s.matrix);
    bool signs = true;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        if (i == j ? !(M(i, j) > 0.0) : M(i, j) > 0.0) signs = false;
    bool inverse = true;
    double ratio = INFINITY;
    const bool dense = M.rows() <= 200;
    if (dense) {
      const Eigen::MatrixXd inv = M.fullPivLu().inverse();
      const double mx = inv.maxCoeff();
      ratio = inv.minCoeff() / mx;
      inverse = inv.minCoeff() >= -1e-12 * mx;
    }
    std::lock_guard<std::mutex> g(lock);
    ++systems;
    dense_checked += dense;
    sign_failures += !signs;
    inverse_failures += !inverse;
    worst_inverse_ratio = std::min(worst_inverse_ratio, ratio);
  }
};

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const SolverControls base_controls;

  // Criteria 1-5: sweep over A, manufactured modes and a 4-level family.
  {
    MassSystemTally tally;
    SolverControls controls = base_controls;
    controls.mass_system_observer = [&tally](const SparseSystem& s) { tally(s); };
    int solves = 0, converged = 0, iterates = 0;
    double min_rho = INFINITY, worst_mass = 0.0, worst_mean = 0.0;
    double worst_slack = INFINITY, worst_sum_ratio = 0.0, worst_T1_routes = 0.0;
    bool entropy_ok = true;
    for (double A : {0.25, 1.0, 4.0}) {
      for (int mode : {0, 1, 2}) {
        const double amplitude = mode == 0 ? 1.0 : 10.0;
        const auto mc = stream_function_case(A, 1.0, mode, amplitude);
        convergence_study(
            mc, build_structured(4, 4), 4, 1.0, 1.0, controls,
            [&](int, const Discretization& d, const Solution& s, const SolveReport& rep) {
              ++solves;
              for (const auto& it : rep.history) {
                ++iterates;
                min_rho = std::min(min_rho, it.min_rho);
              }
              if (!rep.converged) return;
              ++converged;
              worst_mass = std::max(worst_mass, std::abs(integrate(d, s.rho) - s.params.M) / s.params.M);
              worst_mean = std::max(worst_mean, std::abs(integrate(d, s.p) / d.geo.domain_measure -
                                                         s.params.rho_star / s.params.A));
              const double tol = 10.0 * rep.final_combined;
              const auto e = audit_entropy(d, s, tol);
              worst_slack = std::min({worst_slack, e.slack_T1() / tol, e.slack_T2() / tol, e.slack_T3() / tol});
              worst_sum_ratio = std::max(worst_sum_ratio, std::abs(e.sum()) / tol);
              worst_T1_routes = std::max(worst_T1_routes, std::abs(e.T1 - e.T1_reordered) /
                                                              std::max({1.0, std::abs(e.T1), std::abs(e.pdivu)}));
              entropy_ok = entropy_ok && e.pass();
            },
            threads());
      }
    }
    report(1, "positivity", solves >= 20 && min_rho > 0.0 && iterates > solves,
           std::to_string(solves) + " solves, " + std::to_string(iterates) + " iterates, min rho " +
               fmt("%.3e", min_rho));
    report(2, "mass", converged == solves && worst_mass <= 1e-8,
           std::to_string(converged) + "/" + std::to_string(solves) + " converged, max rel defect " +
               fmt("%.2e", worst_mass));
    report(3, "mean_pressure", converged == solves && worst_mean <= 1e-8,
           "max |mean p - rho*/A| " + fmt("%.2e", worst_mean));
    report(4, "m_matrix",
           tally.systems > 0 && tally.dense_checked > 0 && tally.sign_failures == 0 && tally.inverse_failures == 0,
           std::to_string(tally.systems) + " systems, " + std::to_string(tally.dense_checked) +
               " dense inverses, min inv/max " + fmt("%.2e", tally.worst_inverse_ratio));
    report(5, "entropy", converged == solves && entropy_ok && worst_T1_routes <= 1e-12,
           "tol = 10 x residual; min slack/tol " + fmt("%.3g", worst_slack) + ", max |sum|/tol " +
               fmt("%.3g", worst_sum_ratio) + ", T1 routes " + fmt("%.1e", worst_T1_routes));
  }

  // 6: divergence preservation for polynomial fields with exact quadrature.
  {
    SmoothVectorField cubic;
    cubic.value = [](const Point& p) {
      const double x = p.x(), y = p.y();
      return Vec2(x * x * y - y * y * y + 2 * x, x * y * y + x * x * x - 3 * y);
    };
    cubic.jacobian = [](const Point& p) {
      const double x = p.x(), y = p.y();
      Mat2 J;
      J << 2 * x * y + 2, x * x - 3 * y * y, y * y + 3 * x * x, 2 * x * y - 3;
      return J;
    };
    double worst = 0.0;
    bool ok = true;
    for (const auto& m : family(build_structured(3, 2, {0.0, 0.0, 1.5, 1.0}), 4)) {
      const auto e = check_divergence_preservation(Discretization(m), cubic, 3);
      worst = std::max(worst, e.values.front());
      ok = ok && e.pass;
    }
    report(6, "divergence", ok && worst <= 1e-12, "max cell mismatch " + fmt("%.2e", worst));
  }

  // 7: interpolation orders.
  {
    const auto r = interpolation_errors(family(build_structured(4, 4), 4), sine_field());
    const bool ok = r.fitted && std::abs(r.fit_l2.slope - 2.0) <= 0.2 && std::abs(r.fit_h1b.slope - 1.0) <= 0.2 &&
                    r.fit_l2.r_squared >= 0.98 && r.fit_h1b.r_squared >= 0.98;
    report(7, "interpolation", ok,
           "L2 slope " + fmt("%.3f", r.fit_l2.slope) + " (R2 " + fmt("%.4f", r.fit_l2.r_squared) + "), H1 slope " +
               fmt("%.3f", r.fit_h1b.slope) + " (R2 " + fmt("%.4f", r.fit_h1b.r_squared) + ")");
  }

  // 8 and 9: mode-0 manufactured study, single-threaded, with weak residuals.
  {
    const auto mc = stream_function_case(1.0, 1.0, 0);
    const auto psi = default_psi_family();
    std::vector<std::vector<double>> r1(psi.size()), r2(psi.size());
    const auto s0 = std::chrono::steady_clock::now();
    const auto table = convergence_study(
        mc, build_structured(4, 4), 4, 1.0, 1.0, base_controls,
        [&](int, const Discretization& d, const Solution& s, const SolveReport&) {
          const auto w = weak_residuals(d, s, mc.f, psi);
          for (std::size_t i = 0; i < w.size(); ++i) {
            r1[i].push_back(w[i].R1);
            r2[i].push_back(w[i].R2);
          }
        },
        1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
    bool all = table.levels_used.size() == 4 && table.slope_u_h1b.has_value();
    const double slope = all ? table.slope_u_h1b->slope : NAN;
    report(8, "velocity_rate", all && slope >= 0.8 && slope <= 1.3 && secs <= 600.0,
           "broken H1 slope " + fmt("%.3f", slope) + " (R2 " +
               fmt("%.4f", all ? table.slope_u_h1b->r_squared : NAN) + "), " + fmt("%.1f s", secs));
    bool decay = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      decay = decay && r1[i].size() == 4 && decreasing_with_slack(r1[i], 0.1) && decreasing_with_slack(r2[i], 0.1);
      for (std::size_t l = 1; l < r1[i].size(); ++l)
        worst = std::max({worst, r1[i][l] / r1[i][l - 1], r2[i][l] / r2[i][l - 1]});
    }
    report(9, "weak_residuals", decay, std::to_string(psi.size()) + " psi, max level ratio " + fmt("%.3f", worst));
  }

  // 10: jump, pairing and translate constants across 4 refinements.
  {
    std::vector<double> jump, pairing, translate;
    for (const auto& m : family(build_structured(4, 4), 5)) {
      const Discretization d(m);
      const auto c = measure_inequalities(d, 20, 1234);
      jump.push_back(c.jump_ratio);
      pairing.push_back(c.pairing_constant);
      const auto v = interpolate_rh(d, sine_field().value);
      translate.push_back(translate_norm(d, v, Vec2(d.geo.h, 0.0)).constant);
    }
    std::vector<double> rj, rp, rt;
    const bool ok = bounded_trend(jump, 2.0, &rj) && bounded_trend(pairing, 2.0, &rp) &&
                    bounded_trend(translate, 2.0, &rt);
    auto range = [](const std::vector<double>& r) {
      return fmt("[%.2f, ", *std::min_element(r.begin(), r.end())) +
             fmt("%.2f]", *std::max_element(r.begin(), r.end()));
    };
    report(10, "constants", ok, "ratios to coarsest: jump " + range(rj) + ", pairing " + range(rp) +
                                    ", translate " + range(rt));
  }

  // 11: log-mean bracketing.
  {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> expo(-10.0, 10.0), rel(-1e-9, 1e-9);
    long violations = 0;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
      const double a = std::pow(10.0, expo(rng));
      const double b = i % 5 == 0 ? a * (1.0 + rel(rng)) : std::pow(10.0, expo(rng));
      try {
        const double r = log_mean_bracket(a, b);
        if (!(r >= std::min(a, b) && r <= std::max(a, b))) ++violations;
      } catch (const std::logic_error&) {
        ++violations;
      }
    }
    report(11, "log_mean", violations == 0, std::to_string(n) + " pairs, " + std::to_string(violations) + " violations");
  }

  // 12: inf-sup constant over 3 levels, two base meshes.
  {
    bool ok = true;
    std::string detail;
    for (const Mesh& base : {build_structured(4, 4), build_structured(3, 2, {0.0, 0.0, 1.5, 1.0})}) {
      double first = 0.0;
      for (const auto& m : family(base, 3)) {
        const double c = infsup_constant(Discretization(m));
        if (first == 0.0) first = c;
        ok = ok && c > 0.0 && c >= 0.5 * first;
        detail += fmt("%.3f ", c);
      }
      detail += "| ";
    }
    report(12, "infsup", ok, "c = " + detail.substr(0, detail.size() - 3));
  }

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(results.size()) - failed, results.size(), total);
  return failed == 0 ? 0 : 1;
}
