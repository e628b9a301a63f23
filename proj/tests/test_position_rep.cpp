#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qdeform/position_rep.hpp"

using namespace qdeform;

namespace {

// Roots of r(r-1) + p r + s = 0 where p = lim x phi1 and s = lim x^2 phi2,
// both read off the coefficient functions near the origin.
std::pair<double, double> indicial_oracle(double q) {
  const OdeProblem problem{q, 0.3};
  const double x = 1e-9;
  const auto c = ode_coefficients(x, problem);
  const double p = x * c.phi1;
  const double s = x * x * c.phi2;
  const double b = p - 1.0;
  const double disc = std::sqrt(b * b - 4.0 * s);
  const double big = b >= 0 ? (-b - disc) / 2.0 : (-b + disc) / 2.0;
  const double small = big != 0.0 ? s / big : 0.0;
  return std::abs(small) < std::abs(big) ? std::make_pair(small, big) : std::make_pair(big, small);
}

double ode_residual(const OdeProblem& problem, const SeriesValue& v, double x) {
  const auto c = ode_coefficients(x, problem);
  return v.d2psi + c.phi1 * v.dpsi + c.phi2 * v.psi;
}

}  // namespace

TEST(OdeCoefficients, HandEvaluated) {
  const OdeProblem problem{3.0, 0.0};
  EXPECT_DOUBLE_EQ(problem.beta(), -2.0);
  const auto c = ode_coefficients(1.0, problem);
  EXPECT_DOUBLE_EQ(c.phi1, 3.0);
  EXPECT_NEAR(c.phi2, 0.0, 1e-15);
}

TEST(OdeCoefficients, AffineAndPoleStructure) {
  const OdeProblem problem{1.8, -0.6};
  const double slope = 2.0 * problem.u / (1.0 - problem.q);
  auto shifted = [&](double x) { return ode_coefficients(x, problem).phi2 + x * x; };
  for (double x : {-2.0, -0.3, 0.5, 1.7, 4.0}) {
    EXPECT_NEAR(shifted(x + 0.25) - shifted(x), 0.25 * slope, 1e-13);
  }
  double bound = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const double x = std::pow(10.0, -k);
    const auto c = ode_coefficients(x, problem);
    EXPECT_NEAR(x * c.phi1, 2.0 * problem.q / (problem.q - 1.0), 1e-13);
    bound = std::max(bound, std::abs(c.phi2));
  }
  EXPECT_LT(bound, 10.0);
}

TEST(OdeCoefficients, GenericFormReducesToIdentity) {
  const OdeProblem problem{2.5, 0.4};
  for (double x : {-1.5, 0.2, 3.0}) {
    const auto a = ode_coefficients(x, problem);
    const auto b = ode_coefficients(x, problem, Jet{x, 1.0, 0.0});
    EXPECT_NEAR(a.phi1, b.phi1, 1e-14 * std::abs(a.phi1));
    EXPECT_NEAR(a.phi2, b.phi2, 1e-13 * (1.0 + std::abs(a.phi2)));
  }
}

TEST(OdeCoefficients, Errors) {
  try {
    ode_coefficients(0.0, OdeProblem{3.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::pole);
  }
  try {
    ode_coefficients(1.0, OdeProblem{1.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parameter);
  }
  EXPECT_THROW(indicial_exponents(1.0), Error);
}

TEST(IndicialExponents, MatchOracle) {
  for (double q : {1.5, 2.0, 3.0, 10.0}) {
    const auto [r1, r2] = indicial_exponents(q);
    const auto [o1, o2] = indicial_oracle(q);
    EXPECT_EQ(r1, 0.0);
    EXPECT_NEAR(r1, o1, 1e-12) << q;
    EXPECT_NEAR(r2, o2, 1e-12) << q;
  }
  EXPECT_DOUBLE_EQ(indicial_exponents(3.0).second, -2.0);
  EXPECT_NEAR(indicial_exponents(1e3).second, -1.0, 2.1e-3);
  EXPECT_NEAR(indicial_exponents(1e3).second, indicial_oracle(1e3).second, 1e-12);
}

TEST(FrobeniusSeries, LeadingTerm) {
  const OdeProblem problem{1.6, 0.4};
  double prev = 1.0;
  for (double x : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double err = std::abs(frobenius_series(problem, Branch::r0, 12, x).psi - 1.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(FrobeniusSeries, AgreesWithIntegration) {
  const OdeProblem problem{3.0, 0.0};
  const SeriesValue direct = frobenius_series(problem, Branch::r0, 12, 0.1);
  IntegrationOptions opts;
  opts.x_seed = 0.01;
  opts.seed_order = 20;
  opts.sample_step = 0.01;
  const OdeSolution sol = integrate_psi(problem, Branch::r0, 0.1, opts);
  EXPECT_NEAR(sol.grid.back(), 0.1, 1e-15);
  EXPECT_NEAR(sol.values.back(), direct.psi, 1e-8);
  EXPECT_NEAR(sol.derivatives.back(), direct.dpsi, 1e-8);
}

TEST(FrobeniusSeries, ResidualOrder) {
  for (const OdeProblem& problem : {OdeProblem{3.0, 0.5}, OdeProblem{1.5, -0.8}}) {
    const unsigned order = 8;
    const double x1 = 0.1, x2 = 0.2;
    const double r1 = std::abs(ode_residual(problem, frobenius_series(problem, Branch::r0, order, x1), x1));
    const double r2 = std::abs(ode_residual(problem, frobenius_series(problem, Branch::r0, order, x2), x2));
    const double slope = std::log(r2 / r1) / std::log(x2 / x1);
    EXPECT_GE(slope, order - 2.0) << problem.q;
  }
}

TEST(FrobeniusSeries, SecondBranch) {
  const OdeProblem problem{1.5, 0.3};  // r2 = -5, an integer gap: degenerate
  try {
    frobenius_series(problem, Branch::r1, 12, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::branch_degenerate);
  }
  const OdeProblem generic{10.0, 0.5};  // r2 = -11/9
  const SeriesValue v = frobenius_series(generic, Branch::r1, 12, 0.05);
  EXPECT_NEAR(v.psi / std::pow(0.05, -11.0 / 9.0), 1.0, 1e-2);
  EXPECT_LT(std::abs(ode_residual(generic, v, 0.05)), 1e-8 * std::abs(v.d2psi));
}

TEST(FrobeniusSeries, DegenerateAtThree) {
  try {
    frobenius_series(OdeProblem{3.0, 0.0}, Branch::r1, 12, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::branch_degenerate);
  }
}

TEST(FrobeniusSeries, Guards) {
  const OdeProblem problem{3.0, 0.0};
  EXPECT_THROW(frobenius_series(problem, Branch::r0, 7, 0.1), Error);
  EXPECT_THROW(frobenius_series(problem, Branch::r0, 12, 0.0), Error);
  EXPECT_THROW(frobenius_series(problem, Branch::r0, 12, 0.25), Error);
  EXPECT_NO_THROW(frobenius_series(problem, Branch::r0, 12, -0.1));
  EXPECT_THROW(frobenius_series(OdeProblem{10.0, 0.5}, Branch::r1, 12, -0.1), Error);
}

TEST(IntegratePsi, DualIntegratorAgreement) {
  const OdeProblem problem{3.0, 0.0};
  IntegrationOptions a;
  IntegrationOptions b;
  b.method = Stepper::bulirsch_stoer;
  const OdeSolution sa = integrate_psi(problem, Branch::r0, 3.0, a);
  const OdeSolution sb = integrate_psi(problem, Branch::r0, 3.0, b);
  ASSERT_EQ(sa.grid.back(), 3.0);
  ASSERT_EQ(sb.grid.back(), 3.0);
  EXPECT_LT(std::abs(sa.values.back() - sb.values.back()), 1e-6 * std::abs(sa.values.back()));
}

TEST(IntegratePsi, GrowthClassDefined) {
  const OdeSolution sol = integrate_psi(OdeProblem{3.0, 0.0}, Branch::r0, 4.0);
  EXPECT_TRUE(sol.growth == GrowthClass::growing || sol.growth == GrowthClass::decaying);
  EXPECT_EQ(sol.growth, GrowthClass::growing);
  EXPECT_GT(sol.envelope_slope, 0.0);
  for (std::size_t i = 1; i < sol.grid.size(); ++i) ASSERT_GT(sol.grid[i], sol.grid[i - 1]);
  ASSERT_FALSE(sol.l2_partial.empty());
  for (std::size_t i = 1; i < sol.l2_partial.size(); ++i) {
    EXPECT_GT(sol.l2_partial[i].first, sol.l2_partial[i - 1].first);
    EXPECT_GE(sol.l2_partial[i].second, sol.l2_partial[i - 1].second);
  }
}

TEST(IntegratePsi, EnvelopeOfPureGaussian) {
  // exp(x^2/2) and exp(-x^2/2) have unit slopes of log|psi| against x^2/2.
  std::vector<double> grid, up, down;
  for (int i = 0; i <= 100; ++i) {
    const double x = 3.0 + 0.01 * i;
    grid.push_back(x);
    up.push_back(std::exp(x * x / 2.0) * (1.0 + 1.0 / x));
    down.push_back(std::exp(-x * x / 2.0));
  }
  EXPECT_NEAR(envelope_slope(grid, up, 3.0, 4.0), 1.0, 0.05);
  EXPECT_NEAR(envelope_slope(grid, down, 3.0, 4.0), -1.0, 1e-12);
}

TEST(IntegratePsi, ReflectionSymmetry) {
  // Integrate the u problem directly toward negative x from a series seed at
  // x = -0.05, and compare with the reflected -u solution.
  const OdeProblem problem{2.0, 0.6};
  IntegrationOptions opts;
  const SeriesValue seed = frobenius_series(problem, Branch::r0, opts.seed_order, -opts.x_seed);
  const OdeSolution direct = integrate_from(problem, -opts.x_seed, seed.psi, seed.dpsi, -2.5, opts);
  const OdeSolution mirrored = reflect_to_negative_axis(problem, Branch::r0, 2.5, opts);
  ASSERT_EQ(direct.grid.size(), mirrored.grid.size());
  const std::size_t n = direct.grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    EXPECT_NEAR(direct.grid[i], mirrored.grid[j], 1e-12);
    EXPECT_NEAR(direct.values[i], mirrored.values[j], 1e-8 * std::max(1.0, std::abs(direct.values[i])));
    EXPECT_NEAR(direct.derivatives[i], mirrored.derivatives[j], 1e-8 * std::max(1.0, std::abs(direct.derivatives[i])));
  }
}

TEST(IntegratePsi, Validation) {
  EXPECT_THROW(integrate_psi(OdeProblem{1.0, 0.0}, Branch::r0, 4.0), Error);
  EXPECT_THROW(integrate_psi(OdeProblem{3.0, 0.0}, Branch::r0, 0.01), Error);
}

TEST(InfinityPoint, NotFuchsian) {
  for (const OdeProblem& p : {OdeProblem{3.0, 0.0}, OdeProblem{1.2, 0.7}, OdeProblem{10.0, -2.0}}) {
    const InfinityReport r = infinity_pole_order(p);
    EXPECT_GE(r.pole_order, 5.99);
    EXPECT_GT(r.pole_order, r.fuchsian_bound);
    EXPECT_FALSE(r.fuchsian);
  }
}

TEST(Scan, GrowingRowsAccumulate) {
  const OdeProblem problem{10.0, 0.5};
  std::vector<double> thetas;
  for (int i = 0; i < 6; ++i) thetas.push_back(std::numbers::pi * i / 6.0);
  const ScanReport report = square_integrability_scan(problem, thetas, 4.5);
  EXPECT_TRUE(report.second_branch_seedable);
  ASSERT_EQ(report.rows.size(), thetas.size());
  for (const auto& row : report.rows) {
    if (row.growth != GrowthClass::growing) continue;
    EXPECT_GT(row.last_increment, 10.0 * row.first_increment) << row.theta;
  }
}

TEST(Scan, RefinedMixtureDecays) {
  const OdeProblem problem{10.0, 0.5};
  const double x_end = 4.5;
  const ScanReport report = square_integrability_scan(problem, {0.0}, x_end);
  ASSERT_TRUE(report.refined);
  EXPECT_EQ(report.refined->growth, GrowthClass::decaying);
  EXPECT_TRUE(report.any_decaying);

  // Rebuild the refined mixture here and check its L2 increments shrink past x=3.
  const OdeSolution r0 = integrate_psi(problem, Branch::r0, x_end);
  const OdeSolution r1 = integrate_psi(problem, Branch::r1, x_end);
  const double s0 = 1.0 / r0.values.back();
  const double s1 = 1.0 / r1.values.back();
  const double xe = r0.grid.back();
  const double g0 = s0 * (r0.derivatives.back() + xe * r0.values.back());
  const double g1 = s1 * (r1.derivatives.back() + xe * r1.values.back());
  const double theta = std::atan2(-g0, g1);
  EXPECT_NEAR(theta, report.refined->theta, 1e-12);
  std::vector<double> mix(r0.grid.size());
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = std::cos(theta) * s0 * r0.values[i] + std::sin(theta) * s1 * r1.values[i];
  const auto l2 = l2_partials(r0.grid, mix, 1.1);
  double prev = -1.0;
  for (std::size_t i = 1; i < l2.size(); ++i) {
    if (l2[i - 1].first < 3.0) continue;
    const double inc = l2[i].second - l2[i - 1].second;
    if (prev >= 0.0) EXPECT_LT(inc, prev) << l2[i].first;
    prev = inc;
  }
  EXPECT_GE(prev, 0.0);
}

TEST(Scan, SingleBranchWhenDegenerate) {
  const ScanReport report = square_integrability_scan(OdeProblem{3.0, 0.0}, {0.0, 1.0, 2.0}, 4.0);
  EXPECT_FALSE(report.second_branch_seedable);
  EXPECT_FALSE(report.note.empty());
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].growth, GrowthClass::growing);
}

TEST(Scan, Deterministic) {
  const OdeProblem problem{10.0, 0.5};
  const std::vector<double> thetas{0.0, 0.7, 1.4, 2.1};
  const ScanReport a = square_integrability_scan(problem, thetas, 4.0);
  const ScanReport b = square_integrability_scan(problem, thetas, 4.0);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].growth, b.rows[i].growth);
    EXPECT_EQ(a.rows[i].envelope_slope, b.rows[i].envelope_slope);
    EXPECT_EQ(a.rows[i].l2_final, b.rows[i].l2_final);
  }
}
