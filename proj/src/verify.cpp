#include "crstokes/verify.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace crstokes {
namespace {

constexpr double kPi = std::numbers::pi;

AuditEntry entry(std::string check, std::string anchor, std::string comparison) {
  AuditEntry e;
  e.check = std::move(check);
  e.anchor = std::move(anchor);
  e.comparison = std::move(comparison);
  e.pass = true;
  return e;
}

SmoothVectorField polynomial_field() {
  SmoothVectorField v;
  v.value = [](const Point& p) {
    const double x = p.x(), y = p.y();
    return Vec2(x * (1 - x) * y * (1 - y), x * x * y * (1 - y));
  };
  v.jacobian = [](const Point& p) {
    const double x = p.x(), y = p.y();
    Mat2 J;
    J << (1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y), 2 * x * y * (1 - y), x * x * (1 - 2 * y);
    return J;
  };
  return v;
}

SmoothScalarField sine_field() {
  return {[](const Point& p) { return std::sin(kPi * p.x()) * std::sin(kPi * p.y()); },
          [](const Point& p) {
            return Vec2(kPi * std::cos(kPi * p.x()) * std::sin(kPi * p.y()),
                        kPi * std::sin(kPi * p.x()) * std::cos(kPi * p.y()));
          }};
}

}  // namespace

AuditReport run_verification(const Mesh& base, const VerifyOptions& opt) {
  if (opt.levels < 1) throw std::invalid_argument("run_verification: levels must be >= 1");
  std::vector<Mesh> meshes{base};
  for (int l = 1; l < opt.levels; ++l) meshes.push_back(refine_uniform(meshes.back()));
  std::vector<std::unique_ptr<Discretization>> discs;
  for (const auto& m : meshes) discs.push_back(std::make_unique<Discretization>(m));

  AuditReport report;

  auto quality = entry("mesh_regularity", "theta > 0, h_sigma |sigma| <= 2 theta^-d |K|",
                       "no violations on any level");
  for (const auto& d : discs) {
    const auto q = regularity_theta(d->mesh, d->geo);
    quality.values.push_back(q.theta);
    if (!(q.theta > 0.0) || !q.measure_inequality_violations.empty()) quality.pass = false;
  }
  report.add(quality);

  auto divergence = entry("divergence_preservation", "int_K div_h(r_h v) = int_K div v",
                          "max_K mismatch <= 1e-12 on every level");
  const auto poly = polynomial_field();
  for (const auto& d : discs) {
    const auto e = check_divergence_preservation(*d, poly, 4);
    divergence.values.push_back(e.values.front());
    divergence.pass = divergence.pass && e.pass;
  }
  report.add(divergence);

  if (meshes.size() >= 3) report.add(check_interp_rates(meshes, sine_field()));

  auto jump = entry("jump_bound", "sum h_sigma^-1 int [v]^2 <= c |v|_1h^2",
                    "sampled ratio <= explicit constant; ratio within 2x of coarsest");
  auto trace = entry("trace", "||v||_sigma <= (d|sigma|/|K|)^1/2 (||v||_K + h_K ||grad v||_K)", "ratio <= 1");
  auto poincare = entry("poincare", "||v - v_mK||_K <= h_K / pi ||grad v||_K", "ratio <= 1");
  auto pairing = entry("jump_pairing", "sum |int a [v] f| <= c h |v|_1h |f|_1",
                       "empirical c within 2x of coarsest");
  auto translate = entry("translate", "||v~(.+eta) - v~||^2 <= c |eta| (|eta| + h) |v|_1h^2",
                         "empirical c within 2x of coarsest, eta = (h, 0)");
  auto infsup = entry("infsup", "sup_v (q, div_h v) / |v|_1h >= c ||q - q_m||",
                      "c > 0 on every level, >= 0.5x coarsest");
  for (std::size_t l = 0; l < discs.size(); ++l) {
    const auto& d = *discs[l];
    for (const auto& e : check_inequalities(d, opt.n_random, opt.controls.seed + l)) {
      AuditEntry* target = e.check == "jump_bound" ? &jump
                           : e.check == "trace"    ? &trace
                           : e.check == "poincare" ? &poincare
                                                   : &pairing;
      target->values.push_back(e.values.front());
      target->pass = target->pass && e.pass;
    }
    const auto rv = interpolate_rh(d, sine_field().value);
    translate.values.push_back(translate_norm(d, rv, Vec2(d.geo.h, 0.0), opt.translate_resolution).constant);
    if (static_cast<int>(d.mesh.num_cells()) <= opt.dense_cell_limit) {
      const double c = infsup_constant(d);
      infsup.values.push_back(c);
      infsup.pass = infsup.pass && c > 0.0;
    }
  }
  jump.pass = bounded_trend(jump.values, 2.0, &jump.trend) && jump.pass;
  pairing.pass = bounded_trend(pairing.values, 2.0, &pairing.trend) && pairing.pass;
  translate.pass = bounded_trend(translate.values, 2.0, &translate.trend);
  for (double v : infsup.values) {
    infsup.trend.push_back(v / infsup.values.front());
    if (v < 0.5 * infsup.values.front()) infsup.pass = false;
  }
  for (auto* e : {&jump, &trace, &poincare, &pairing, &translate, &infsup}) report.add(*e);

  // Manufactured solves.
  const auto mc = stream_function_case(opt.A, opt.M, opt.mode, opt.amplitude);
  auto converged = entry("convergence", "nonlinear solve reaches tolerance", "every level converged");
  auto positivity = entry("positivity", "rho_K > 0", "min rho over all iterates > 0");
  auto mass = entry("mass", "int rho = M", "|int rho - M| / M <= 1e-8");
  auto mean_p = entry("mean_pressure", "mean(p) = rho* / A", "|mean(p) - rho*/A| <= 1e-8");
  auto mmatrix = entry("m_matrix", "mass operator is an M-matrix",
                       "sign pattern; nonnegative inverse when cells <= 200");
  auto entropy = entry("entropy", "T1 >= int p div u, T2 >= convexity bound, T3 >= |rho|^2/A, T1+T2+T3 = 0",
                       "slacks >= -tol, |sum| <= tol, tol = 10 x achieved residual");
  auto weak1 = entry("weak_residual_momentum", "R1(psi) -> 0", "nonincreasing with 10% slack, every psi");
  auto weak2 = entry("weak_residual_mass", "R2(psi) -> 0", "nonincreasing with 10% slack, every psi");
  const auto family = default_psi_family();
  std::vector<std::vector<double>> r1(family.size()), r2(family.size());

  auto on_level = [&](int, const Discretization& d, const Solution& s, const SolveReport& rep) {
    converged.values.push_back(rep.final_combined);
    converged.pass = converged.pass && rep.converged;
    double min_rho = INFINITY;
    for (const auto& it : rep.history) min_rho = std::min(min_rho, it.min_rho);
    positivity.values.push_back(min_rho);
    positivity.pass = positivity.pass && min_rho > 0.0;
    const double defect = std::abs(integrate(d, s.rho) - s.params.M) / s.params.M;
    mass.values.push_back(defect);
    mass.pass = mass.pass && defect <= 1e-8;
    const double mp = integrate(d, s.p) / d.geo.domain_measure;
    const double dev = std::abs(mp - s.params.rho_star / s.params.A);
    mean_p.values.push_back(dev);
    mean_p.pass = mean_p.pass && dev <= 1e-8;
    const auto sys = assemble_mass_balance(d, s.u, s.rho, s.params);
    const auto mm = verify_m_matrix(sys, 200);
    mmatrix.values.push_back(mm.min_inverse_entry);
    mmatrix.pass = mmatrix.pass && mm.pass();
    if (!rep.converged) return;
    const auto eb = audit_entropy(d, s, 10.0 * rep.final_combined);
    entropy.values.insert(entropy.values.end(), {eb.slack_T1(), eb.slack_T2(), eb.slack_T3(), eb.sum()});
    const double scale = std::max({std::abs(eb.T1), std::abs(eb.pdivu), 1e-300});
    entropy.pass = entropy.pass && eb.pass() && std::abs(eb.T1 - eb.T1_reordered) <= 1e-12 * std::max(scale, 1.0);
    const auto w = weak_residuals(d, s, mc.f, family);
    for (std::size_t i = 0; i < w.size(); ++i) {
      r1[i].push_back(w[i].R1);
      r2[i].push_back(w[i].R2);
    }
  };
  const auto table = convergence_study(mc, base, std::max(opt.levels, 3), opt.alpha, opt.beta,
                                       opt.controls, on_level, opt.max_threads);
  for (std::size_t i = 0; i < family.size(); ++i) {
    weak1.values.insert(weak1.values.end(), r1[i].begin(), r1[i].end());
    weak2.values.insert(weak2.values.end(), r2[i].begin(), r2[i].end());
    weak1.pass = weak1.pass && decreasing_with_slack(r1[i], 0.1);
    weak2.pass = weak2.pass && decreasing_with_slack(r2[i], 0.1);
  }
  for (auto* e : {&converged, &positivity, &mass, &mean_p, &mmatrix, &entropy, &weak1, &weak2}) report.add(*e);

  auto rate = entry("velocity_rate", "broken H1 velocity error = O(h)",
                    "slope in [0.8, 1.3] when >= 4 levels and R^2 >= 0.98, otherwise recorded");
  for (const auto& row : table.levels) rate.values.push_back(row.errors.u_h1b);
  if (table.slope_u_h1b) {
    rate.values.push_back(table.slope_u_h1b->slope);
    if (table.levels_used.size() >= 4 && table.slope_u_h1b->r_squared >= 0.98)
      rate.pass = table.slope_u_h1b->slope >= 0.8 && table.slope_u_h1b->slope <= 1.3;
  }
  report.add(rate);

  auto logmean = entry("log_mean_bracket", "min <= (a - b)/(log a - log b) <= max", "zero violations");
  std::mt19937_64 rng(opt.controls.seed);
  std::uniform_real_distribution<double> expo(-8.0, 8.0), rel(-1e-6, 1e-6);
  int violations = 0;
  for (int i = 0; i < opt.log_mean_samples; ++i) {
    const double a = std::pow(10.0, expo(rng));
    const double b = (i % 4 == 0) ? a * (1.0 + rel(rng)) : std::pow(10.0, expo(rng));
    try {
      const double r = log_mean_bracket(a, b);
      if (!(r >= std::min(a, b) && r <= std::max(a, b))) ++violations;
    } catch (const std::logic_error&) {
      ++violations;
    }
  }
  logmean.values = {static_cast<double>(opt.log_mean_samples), static_cast<double>(violations)};
  logmean.pass = violations == 0;
  report.add(logmean);
  return report;
}

}  // namespace crstokes
