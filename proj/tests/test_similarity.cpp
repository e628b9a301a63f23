#include <cfloat>
#include <cmath>
#include <limits>
#include <optional>

#include <gtest/gtest.h>

#include "qdeform/similarity.hpp"

using namespace qdeform;

namespace {

DeformParams params(double q, double u, std::size_t dim) {
  DeformParams p;
  p.q = q;
  p.u = u;
  p.dim = dim;
  return p;
}

const SimilaritySolution<Wide>& reference_solution() {
  static const SimilaritySolution<Wide> sol = solve_similarity<Wide>(params(1.2, 0.7, 48));
  return sol;
}

// Raw (ungauged) recurrence column in long double, for hand-checkable values
// and for locating where binary64 overflows.
std::vector<long double> raw_column(std::size_t n, std::size_t rows, long double q, long double u) {
  std::vector<long double> s(rows, 0.0L);
  s[0] = 1.0L;
  for (std::size_t m = 0; m + 1 < rows; ++m) {
    const long double prev = m == 0 ? 0.0L : s[m - 1];
    const long double lhs = (2.0L * (static_cast<long double>(n) - m * q) - u * u) * s[m];
    s[m + 1] = (lhs - u * std::sqrt(2.0L) * std::sqrt(static_cast<long double>(m)) * prev) /
               (u * std::sqrt(2.0L) * std::sqrt(static_cast<long double>(m + 1)));
  }
  return s;
}

}  // namespace

TEST(TargetOperator, Structure) {
  EXPECT_EQ(max_abs(CMatrix(target_operator(1.0, 0.0, 7).mat() - number(7).mat())), 0.0);
  const FockMatrix m = target_operator(2.0, 1.0, 3);
  EXPECT_NEAR(m(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(m(1, 1).real(), 2.5, 1e-15);
  EXPECT_NEAR(m(0, 1).real(), 0.7071067812, 1e-10);
}

TEST(RecurrenceCoefficients, HandEvaluated) {
  for (std::size_t n : {0u, 3u, 9u}) {
    const auto c = recurrence_coefficients(0, n, 1.7, 0.4, 1e-9);
    ASSERT_TRUE(c);
    EXPECT_EQ(c->lower, 0.0);
  }
  const auto c = recurrence_coefficients(1, 0, 2.0, 1.0, 1e-9);
  ASSERT_TRUE(c);
  EXPECT_NEAR(c->lower, std::sqrt(2.0) / -5.0, 1e-15);
  EXPECT_NEAR(c->upper, -0.4, 1e-15);
  const auto z = recurrence_coefficients(2, 1, 1.3, 0.0, 1e-9);
  ASSERT_TRUE(z);
  EXPECT_EQ(z->lower, 0.0);
  EXPECT_EQ(z->upper, 0.0);
}

TEST(RecurrenceCoefficients, ResonanceFlagged) {
  // 2(n - m q) - u^2 = 2(2 - 1) - 2 = 0
  EXPECT_FALSE(recurrence_coefficients(1, 2, 1.0, std::sqrt(2.0), 1e-9));
}

TEST(SolveS, TrivialBranchIsIdentity) {
  for (std::size_t d : {4u, 12u}) {
    const auto sol = solve_similarity<double>(params(1.0, 0.0, d));
    EXPECT_TRUE(sol.trivial);
    EXPECT_EQ(max_abs(RMatrix<double>(sol.s - RMatrix<double>::Identity(d, d))), 0.0);
    const auto inv = invert_similarity(sol);
    EXPECT_EQ(inv.residual, 0.0);
    EXPECT_EQ(nonunitarity_certificate(sol), 0.0);
  }
}

TEST(SolveS, NoSolutionWhenUVanishes) {
  try {
    solve_similarity<double>(params(2.0, 0.0, 32));
    FAIL() << "expected no-solution error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_solution);
  }
}

TEST(SolveS, ParameterValidation) {
  EXPECT_THROW(solve_similarity<double>(params(-1.0, 0.5, 8)), Error);
  EXPECT_THROW(solve_similarity<double>(params(1.2, 0.5, 3)), Error);
  EXPECT_THROW(solve_similarity<double>(params(1.2, std::nan(""), 8)), Error);
}

TEST(SolveS, HandEvaluatedFirstColumn) {
  const auto col = raw_column(0, 3, 2.0L, 1.0L);
  EXPECT_NEAR(static_cast<double>(col[1]), -0.7071068, 1e-7);
  EXPECT_NEAR(static_cast<double>(col[2]), 1.0606602, 1e-7);
  const auto sol = solve_similarity<double>(params(2.0, 1.0, 6));
  const double g = sol.column_gauge[0];
  EXPECT_NEAR(sol.s(0, 0), g, 1e-15);
  EXPECT_NEAR(sol.s(1, 0) / g, -1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(sol.s(2, 0) / g, 1.5 / std::sqrt(2.0), 1e-14);
}

TEST(SolveS, UnitMaxAbsColumns) {
  const auto& sol = reference_solution();
  for (Eigen::Index n = 0; n < sol.s.rows(); ++n) EXPECT_NEAR(max_abs(RMatrix<Wide>(sol.s.col(n))), 1.0, 1e-30);
}

TEST(SolveS, SylvesterResidualAgainstProductOracle) {
  const auto& sol = reference_solution();
  const std::size_t d = 48;
  const RMatrix<Wide> m = target_operator_real<Wide>(Wide(1.2), Wide(0.7), d);
  RMatrix<Wide> n = RMatrix<Wide>::Zero(d, d);
  for (std::size_t i = 0; i < d; ++i) n(i, i) = Wide(i);
  const RMatrix<Wide> r = m * sol.s - sol.s * n;
  for (std::size_t c = 0; c < d; ++c) {
    const double rel = max_abs(RMatrix<Wide>(r.col(c).head(d - 1))) / max_abs(RMatrix<Wide>(sol.s.col(c)));
    EXPECT_LT(rel, 1e-10) << "column " << c;
    EXPECT_LT(sol.sylvester_residual[c], 1e-10);
  }
  EXPECT_LT(sol.recurrence_residual, 1e-12);
}

TEST(SolveS, EigenvectorReading) {
  const auto& sol = reference_solution();
  const std::size_t d = 48;
  const RMatrix<Wide> m = target_operator_real<Wide>(Wide(1.2), Wide(0.7), d);
  for (std::size_t c = 0; c < d; ++c) {
    const RVector<Wide> r = m * sol.s.col(c) - sol.s.col(c) * Wide(c);
    EXPECT_LT(max_abs(RMatrix<Wide>(r.head(d - 1))) / max_abs(RMatrix<Wide>(sol.s.col(c))), 1e-10);
  }
}

TEST(SolveS, EntriesFiniteAndColumnsGrow) {
  const auto& sol = reference_solution();
  EXPECT_TRUE(sol.s.allFinite());
  // Raw column growth is super-exponential: ratios of successive magnitudes increase.
  const auto col = raw_column(3, 48, 1.2L, 0.7L);
  EXPECT_GT(std::abs(col[47]), 1e30L);
  EXPECT_GT(std::abs(col[47] / col[46]), std::abs(col[30] / col[29]));
}

TEST(SolveS, ConditionReported) {
  const auto& sol = reference_solution();
  ASSERT_TRUE(sol.condition);
  EXPECT_GT(sol.condition->full, sol.condition->interior);
  EXPECT_GT(sol.condition->interior, 1.0);
  EXPECT_TRUE(std::isfinite(sol.condition->full));
}

TEST(SolveS, OverflowNamesFirstIndex) {
  // Locate the first row-major entry exceeding the binary64 range with the long double oracle.
  std::size_t dim = 48;
  std::optional<std::pair<std::size_t, std::size_t>> expected;
  while (!expected) {
    ++dim;
    for (std::size_t m = 0; m < dim && !expected; ++m)
      for (std::size_t n = 0; n < dim && !expected; ++n)
        if (std::abs(raw_column(n, dim, 1.2L, 0.7L)[m]) > static_cast<long double>(DBL_MAX)) expected = {m, n};
  }
  try {
    solve_similarity<double>(params(1.2, 0.7, dim));
    FAIL() << "expected overflow at D=" << dim;
  } catch (const OverflowError& e) {
    EXPECT_EQ(e.row(), expected->first);
    EXPECT_EQ(e.col(), expected->second);
    EXPECT_NE(std::string(e.what()).find("S(" + std::to_string(e.row()) + "," + std::to_string(e.col()) + ")"),
              std::string::npos);
  }
  EXPECT_NO_THROW(solve_similarity<double>(params(1.2, 0.7, dim - 1)));
}

TEST(InvertS, CertifiedAtReferenceParameters) {
  const auto& sol = reference_solution();
  const auto inv = invert_similarity(sol);
  const RMatrix<Wide> prod = sol.s * inv.inverse - RMatrix<Wide>::Identity(48, 48);
  EXPECT_LT(max_abs(prod), 1e-8);
  EXPECT_LT(inv.residual, 1e-8);
}

TEST(InvertS, BinaryDoubleFailsWithCondition) {
  // At D=48 the gauged S is far beyond binary64 conditioning.
  const auto sol = solve_similarity<double>(params(1.2, 0.7, 48));
  try {
    invert_similarity(sol);
    FAIL() << "expected inversion failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::inversion);
  }
  ASSERT_TRUE(sol.condition);
  EXPECT_GT(sol.condition->full, 1e15);
}

TEST(InvertS, GaugeLeavesConjugatedNumberInvariant) {
  const std::size_t d = 48;
  SolveOptions opts;
  for (std::size_t i = 0; i < d; ++i) opts.extra_gauge.push_back(std::pow(1.7, static_cast<double>(i % 7)) + 0.1 * i);
  const auto& s1 = reference_solution();
  const auto s2 = solve_similarity<Wide>(params(1.2, 0.7, d), opts);
  const auto i1 = invert_similarity(s1);
  const auto i2 = invert_similarity(s2);
  RMatrix<Wide> n = RMatrix<Wide>::Zero(d, d);
  for (std::size_t i = 0; i < d; ++i) n(i, i) = Wide(i);
  const RMatrix<Wide> c1 = s1.s * n * i1.inverse;
  const RMatrix<Wide> c2 = s2.s * n * i2.inverse;
  EXPECT_GT(max_abs(RMatrix<Wide>(i1.inverse - i2.inverse)), 1e-3);
  EXPECT_LT(max_abs(RMatrix<Wide>(c1 - c2), d / 2, d / 2), 1e-9);
}

TEST(Nonunitarity, CertificateExceedsBound) {
  const auto sol = solve_similarity<Wide>(params(2.0, 1.0, 32));
  EXPECT_GT(nonunitarity_certificate(sol), 0.01);
  EXPECT_GT(nonunitarity_certificate(reference_solution()), 0.01);
}

TEST(SolveS, PinnedGaugeRowsReproduceMaxAbsGauge) {
  const auto& ref = reference_solution();
  SolveOptions opts;
  opts.gauge_rows = ref.peak_rows;
  opts.estimate_condition = false;
  const auto pinned = solve_similarity<Wide>(params(1.2, 0.7, 48), opts);
  EXPECT_LT(max_abs(RMatrix<Wide>(pinned.s - ref.s)), 1e-90);
}
