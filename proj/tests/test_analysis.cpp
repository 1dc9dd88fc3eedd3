#include "crstokes/analysis.hpp"
#include "crstokes/mms.hpp"
#include "crstokes/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace crstokes;

namespace {

constexpr double kPi = std::numbers::pi;

SmoothScalarField sine_field() {
  return {[](const Point& p) { return std::sin(kPi * p.x()) * std::sin(kPi * p.y()); },
          [](const Point& p) {
            return Vec2(kPi * std::cos(kPi * p.x()) * std::sin(kPi * p.y()),
                        kPi * std::sin(kPi * p.x()) * std::cos(kPi * p.y()));
          }};
}

std::vector<Mesh> hierarchy(const Mesh& base, int levels) {
  std::vector<Mesh> out{base};
  while (static_cast<int>(out.size()) < levels) out.push_back(refine_uniform(out.back()));
  return out;
}

double l2_norm(const Discretization& d, const CRFunction& v) {
  double s = 0.0;
  for (std::size_t K = 0; K < d.mesh.num_cells(); ++K) {
    const auto& c = d.mesh.cells[K];
    for (const auto& q : triangle_rule(d.mesh.vertices[c[0]], d.mesh.vertices[c[1]], d.mesh.vertices[c[2]], 3)) {
      const double x = evaluate(d, v, static_cast<int>(K), q.x);
      s += q.weight * x * x;
    }
  }
  return std::sqrt(s);
}

}  // namespace

TEST(DivergencePreservation, PolynomialAndTrigonometricFields) {
  const Discretization d(refine_uniform(build_structured(3, 2)));
  SmoothVectorField v;
  v.value = [](const Point& p) { return Vec2(std::sin(3 * p.x()) * p.y(), std::exp(p.x() * p.y())); };
  v.jacobian = [](const Point& p) {
    Mat2 J;
    J << 3 * std::cos(3 * p.x()) * p.y(), std::sin(3 * p.x()), p.y() * std::exp(p.x() * p.y()),
        p.x() * std::exp(p.x() * p.y());
    return J;
  };
  const auto e = check_divergence_preservation(d, v, 8);
  EXPECT_TRUE(e.pass);
  EXPECT_LE(e.values.front(), 1e-12);
}

TEST(InterpolationRates, SmoothFieldSlopes) {
  const auto r = interpolation_errors(hierarchy(build_structured(4, 4), 4), sine_field());
  ASSERT_TRUE(r.fitted);
  EXPECT_NEAR(r.fit_l2.slope, 2.0, 0.2);
  EXPECT_NEAR(r.fit_h1b.slope, 1.0, 0.2);
  EXPECT_GE(r.fit_l2.r_squared, 0.98);
  EXPECT_TRUE(check_interp_rates(hierarchy(build_structured(4, 4), 3), sine_field()).pass);
}

TEST(InterpolationRates, AffineFieldIsReproduced) {
  const SmoothScalarField affine{[](const Point& p) { return 1.0 + 2.0 * p.x() - p.y(); },
                                 [](const Point&) { return Vec2(2.0, -1.0); }};
  const auto r = interpolation_errors(hierarchy(build_structured(2, 3), 3), affine);
  EXPECT_FALSE(r.fitted);
  for (double e : r.l2) EXPECT_LE(e, 1e-13);
  for (double e : r.h1b) EXPECT_LE(e, 1e-13);
  EXPECT_THROW(interpolation_errors(hierarchy(build_structured(2, 2), 2), affine), std::invalid_argument);
}

TEST(Inequalities, SampledRatiosRespectExplicitBounds) {
  for (const auto& m : hierarchy(build_structured(3, 2), 3)) {
    const Discretization d(m);
    const auto c = measure_inequalities(d, 15, 77);
    EXPECT_GT(c.jump_ratio, 0.0);
    EXPECT_LE(c.jump_ratio, c.jump_bound);
    EXPECT_LE(c.trace_ratio, 1.0);
    EXPECT_LE(c.poincare_ratio, 1.0);
    EXPECT_GT(c.pairing_constant, 0.0);
    for (const auto& e : check_inequalities(d, 15, 77)) EXPECT_TRUE(e.pass) << e.check;
  }
}

TEST(Translate, ZeroShiftAndDisjointShift) {
  const Discretization d(refine_uniform(build_structured(2, 2)));
  const auto v = interpolate_rh(d, sine_field().value);
  EXPECT_EQ(translate_norm(d, v, Vec2(0.0, 0.0)).norm, 0.0);
  // Disjoint supports: the difference norm is sqrt(2) ||v||.
  const auto far = translate_norm(d, v, Vec2(2.0, 0.0), 512);
  EXPECT_NEAR(far.norm, std::sqrt(2.0) * l2_norm(d, v), 0.02 * far.norm);
  const auto small = translate_norm(d, v, Vec2(d.geo.h, 0.0));
  EXPECT_GT(small.constant, 0.0);
  EXPECT_LT(small.norm, far.norm);
  EXPECT_THROW(translate_norm(d, v, Vec2(0.1, 0.0), 32), std::invalid_argument);
}

TEST(InfSup, PositiveAndInvariantUnderRigidShiftAndScaling) {
  const double c = infsup_constant(Discretization(build_structured(2, 2)));
  EXPECT_GT(c, 0.1);
  EXPECT_NEAR(infsup_constant(Discretization(build_structured(2, 2, {5.0, -3.0, 6.0, -2.0}))), c, 1e-10);
  EXPECT_NEAR(infsup_constant(Discretization(build_structured(2, 2, {0.0, 0.0, 7.0, 7.0}))), c, 1e-10);
}

TEST(LogMean, Examples) {
  EXPECT_NEAR(log_mean_bracket(1.0, std::numbers::e), std::numbers::e - 1.0, 1e-15);
  EXPECT_EQ(log_mean_bracket(3.5, 3.5), 3.5);
  EXPECT_NEAR(log_mean_bracket(2.0, 8.0), log_mean_bracket(8.0, 2.0), 1e-15);
  EXPECT_NEAR(log_mean_bracket(2.0, 8.0), 6.0 / std::log(4.0), 1e-14);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> expo(-12, 12), rel(-1e-12, 1e-12);
  for (int i = 0; i < 100000; ++i) {
    const double a = std::pow(10.0, expo(rng));
    const double b = i % 2 ? a * (1 + rel(rng)) : std::pow(10.0, expo(rng));
    const double r = log_mean_bracket(a, b);
    ASSERT_GE(r, std::min(a, b));
    ASSERT_LE(r, std::max(a, b));
  }
}

TEST(Entropy, TrivialStateIsZero) {
  const Discretization d(build_structured(3, 3));
  Solution s{zero_velocity(d), constant_cell_field(d, 1.0), constant_cell_field(d, 1.0),
             SchemeParams::make(1.0, 1.0, 1.0, 1.0, 1.0)};
  const auto e = audit_entropy(d, s, 1e-12);
  EXPECT_NEAR(e.T1, 0.0, 1e-15);
  EXPECT_NEAR(e.T2, 0.0, 1e-15);
  EXPECT_NEAR(e.T3, 0.0, 1e-15);
  EXPECT_TRUE(e.pass());
  s.rho.values[2] = 0.0;
  EXPECT_THROW(audit_entropy(d, s, 1e-12), std::invalid_argument);
}

TEST(Entropy, ConvergedSolutionBalances) {
  const auto mc = stream_function_case(0.5, 1.0, 2, 10.0);
  const Discretization d(refine_uniform(build_structured(3, 3)));
  const auto params = SchemeParams::make(0.5, 1.0, 1.0, 1.0, 1.0);
  const auto [sol, rep] = solve_scheme(d, params, mc.f, {});
  ASSERT_TRUE(rep.converged);
  const auto e = audit_entropy(d, sol, 1e-9);
  EXPECT_TRUE(e.pass());
  EXPECT_GE(e.slack_T1(), -1e-9);
  EXPECT_GE(e.slack_T2(), -1e-9);
  EXPECT_GE(e.slack_T3(), -1e-9);
  EXPECT_GT(e.T3, 0.0);
  EXPECT_LE(std::abs(e.sum()), 1e-9);
  EXPECT_NEAR(e.T1, e.T1_reordered, 1e-12 * std::max(1.0, std::abs(e.T1)));
}

TEST(WeakResidual, ConstantLoadOracle) {
  // u = 0, constant p, f = (1, 0): R1 = int bump, R2 = 0 because u vanishes.
  const Discretization d(build_structured(3, 3));
  const Solution s{zero_velocity(d), constant_cell_field(d, 2.0), constant_cell_field(d, 2.0),
                   SchemeParams::make(1.0, 2.0, 1.0, 1.0, 1.0)};
  const auto family = default_psi_family();
  ASSERT_EQ(family.size(), 5u);
  const auto w = weak_residuals(d, s, [](const Point&) { return Vec2(1.0, 0.0); }, family, 6);
  EXPECT_NEAR(w[0].R1, 1.0 / 900.0, 1e-15);
  for (const auto& r : w) EXPECT_EQ(r.R2, 0.0);
  // Antisymmetric about x = 1/2: the sin 2 pi x member integrates to zero.
  const auto fine = weak_residuals(d, s, [](const Point&) { return Vec2(1.0, 0.0); }, family, 14);
  EXPECT_NEAR(fine[1].R1, 0.0, 1e-15);
}

TEST(WeakResidual, FamilyGradientsMatchFiniteDifferences) {
  const Point x(0.31, 0.67);
  const double h = 1e-6;
  for (const auto& t : default_psi_family()) {
    const Vec2 g = t.scalar.gradient(x);
    EXPECT_NEAR(g.x(), (t.scalar.value(x + Vec2(h, 0)) - t.scalar.value(x - Vec2(h, 0))) / (2 * h), 1e-8) << t.name;
    EXPECT_NEAR(g.y(), (t.scalar.value(x + Vec2(0, h)) - t.scalar.value(x - Vec2(0, h))) / (2 * h), 1e-8) << t.name;
    EXPECT_EQ(t.scalar.value(Point(0.0, 0.4)), 0.0);
  }
}

TEST(Trends, BoundedAndDecreasing) {
  std::vector<double> ratios;
  EXPECT_TRUE(bounded_trend({1.0, 1.5, 0.3}, 2.0, &ratios));
  EXPECT_EQ(ratios, (std::vector<double>{1.0, 1.5, 0.3}));
  EXPECT_FALSE(bounded_trend({1.0, 2.5}, 2.0));
  EXPECT_TRUE(decreasing_with_slack({1.0, 1.05, 0.5}, 0.1));
  EXPECT_FALSE(decreasing_with_slack({1.0, 1.2}, 0.1));
  AuditReport rep;
  EXPECT_TRUE(rep.pass());
  AuditEntry bad;
  rep.add(bad);
  EXPECT_FALSE(rep.pass());
}
