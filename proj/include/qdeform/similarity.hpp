#pragma once

// The non-unitary similarity operator S with S N S^-1 = q N + u Q + (u^2/2) I.
//
// Reading <m| . |n> of S(2N+I) = q(2N+I)S + 2uQS + beta S gives, column by
// column, the three-term recurrence
//   (2(n - m q) - u^2) S(m,n) = u sqrt(2) (sqrt(m) S(m-1,n) + sqrt(m+1) S(m+1,n)).
// Each column is a one-parameter family; it is fixed by the seed S(0,n) = 1 and
// then rescaled to unit max-abs (N is diagonal, so S -> S Lambda leaves
// S N S^-1 unchanged). Row D-1 of M S - S N would need S(D,n) and is not
// constrained on the truncation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "qdeform/errors.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/scalar.hpp"

namespace qdeform {

struct Tolerances {
  double chain = 1e-6;             // [A,B] against I + (q-1)N, and the S N S^-1 conjugation
  double chain_exact = 1e-8;       // [A,B] against I + S N S^-1 - T N T^-1
  double sylvester = 1e-10;        // relative, per column
  double recurrence = 1e-12;       // relative re-substitution of the three-term recurrence
  double inverse = 1e-6;           // ||S S^-1 - I||_max before inversion is refused
  double resonance_scale = 1e-9;   // resonance_tol = scale * (1 + u^2 + 2 D q)
};

struct DeformParams {
  double q = 1.0;
  double u = 0.0;
  std::size_t dim = 32;
  std::size_t interior = 0;  // 0 selects D/4
  Tolerances tol{};

  std::size_t block() const { return interior != 0 ? interior : std::max<std::size_t>(1, dim / 4); }
  double resonance_tol() const {
    return tol.resonance_scale * (1.0 + u * u + 2.0 * static_cast<double>(dim) * q);
  }
  bool trivial() const { return q == 1.0 && u == 0.0; }

  void validate() const {
    require(std::isfinite(q) && q > 0.0, ErrorKind::parameter,
            "deformation parameter q must be finite and positive (got " + std::to_string(q) + ")");
    require(std::isfinite(u), ErrorKind::parameter, "displacement parameter u must be finite");
    require(dim >= 4, ErrorKind::dimension,
            "similarity solve needs D >= 4 (got D=" + std::to_string(dim) + ")");
    require(block() >= 1 && block() <= dim / 2, ErrorKind::dimension,
            "interior block K=" + std::to_string(block()) + " must satisfy 1 <= K <= D/2 (D=" +
                std::to_string(dim) + ")");
  }

  /// The documented error branch: u = 0 admits no invertible S unless q = 1.
  void require_solvable() const {
    require(!(u == 0.0 && q != 1.0), ErrorKind::no_solution,
            "no similarity operator exists for u=0 with q=" + std::to_string(q) +
                " (the recurrence forces S(m,n)=0 unless 2(n-mq)=u^2)");
  }
};

/// M = q N + u Q + (u^2/2) I.
template <class Real>
RMatrix<Real> target_operator_real(const Real& q, const Real& u, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return q * number_diag<Real>(dim) + u * position_real<Real>(dim) +
         (u * u / Real(2)) * RMatrix<Real>::Identity(d, d);
}

inline FockMatrix target_operator(double q, double u, std::size_t dim) {
  return FockMatrix::from_real(target_operator_real<double>(q, u, dim), "qN+uQ+u^2/2");
}

struct RecurrenceCoefficients {
  double lower;  // multiplies S(m-1,n)
  double upper;  // multiplies S(m+1,n)
};

/// S(m,n) = lower * S(m-1,n) + upper * S(m+1,n); nullopt at a resonance.
inline std::optional<RecurrenceCoefficients> recurrence_coefficients(std::size_t m, std::size_t n, double q,
                                                                     double u, double resonance_tol) {
  const double denom = 2.0 * (static_cast<double>(n) - static_cast<double>(m) * q) - u * u;
  if (std::abs(denom) < resonance_tol) return std::nullopt;
  return RecurrenceCoefficients{u * std::sqrt(2.0 * static_cast<double>(m)) / denom,
                                u * std::sqrt(2.0 * static_cast<double>(m + 1)) / denom};
}

struct ConditionReport {
  double full = 1.0;      // sigma_max / sigma_min of the gauged S
  double interior = 1.0;  // same on the leading D/2 block
  int working_digits = 0;
};

struct SolveOptions {
  /// Extra positive column factors applied after the unit max-abs gauge.
  std::vector<double> extra_gauge;
  /// When set, column n is normalized by |S(gauge_rows[n], n)| instead of its
  /// max-abs entry; keeps the gauge smooth along a parameter path.
  std::vector<std::size_t> gauge_rows;
  bool estimate_condition = true;
};

template <class Real>
struct SimilaritySolution {
  RMatrix<Real> s;
  double q = 1.0;
  double u = 0.0;
  bool trivial = false;
  std::vector<Real> column_gauge;            // factor applied to each raw column
  std::vector<std::size_t> peak_rows;        // row of the max-abs entry of each raw column
  std::vector<double> sylvester_residual;    // per column, rows 0..D-2, relative
  double recurrence_residual = 0.0;          // max over columns, relative
  std::optional<ConditionReport> condition;  // absent when not requested
  std::vector<std::pair<std::size_t, std::size_t>> resonance_flags;

  std::size_t dim() const { return static_cast<std::size_t>(s.rows()); }
  FockMatrix fock() const { return FockMatrix::from_real(s, "S"); }
  double max_sylvester_residual() const {
    return sylvester_residual.empty() ? 0.0
                                      : *std::max_element(sylvester_residual.begin(), sylvester_residual.end());
  }
};

template <class Real>
ConditionReport estimate_condition(const RMatrix<Real>& s) {
  auto ratio = [](const RMatrix<Real>& x) {
    Eigen::JacobiSVD<RMatrix<Real>> svd(x);
    const auto& sv = svd.singularValues();
    const Real lo = sv(sv.size() - 1);
    if (lo == Real(0)) return std::numeric_limits<double>::infinity();
    return to_double(Real(sv(0) / lo));
  };
  const auto half = std::max<Eigen::Index>(1, s.rows() / 2);
  return ConditionReport{ratio(s), ratio(s.topLeftCorner(half, half)), decimal_digits<Real>()};
}

/// Per-column relative residual of (M S - S N) over rows 0..D-2.
template <class Real>
std::vector<double> sylvester_residuals(const RMatrix<Real>& s, const Real& q, const Real& u) {
  const std::size_t dim = static_cast<std::size_t>(s.rows());
  const RMatrix<Real> m = target_operator_real<Real>(q, u, dim);
  const RMatrix<Real> r = m * s - s * number_diag<Real>(dim);
  const auto d = s.rows();
  std::vector<double> out(static_cast<std::size_t>(d));
  for (Eigen::Index n = 0; n < d; ++n) {
    const double scale = max_abs(s.col(n));
    out[static_cast<std::size_t>(n)] = scale > 0.0 ? max_abs(r.col(n).head(d - 1)) / scale : 0.0;
  }
  return out;
}

/// Largest relative violation of the three-term recurrence, rows 0..D-2.
template <class Real>
double recurrence_residual(const RMatrix<Real>& s, const Real& q, const Real& u) {
  using std::abs;
  using std::sqrt;
  const auto d = s.rows();
  const Real root2 = sqrt(Real(2));
  double worst = 0.0;
  for (Eigen::Index n = 0; n < d; ++n) {
    const double scale = max_abs(s.col(n));
    if (scale == 0.0) continue;
    for (Eigen::Index m = 0; m + 1 < d; ++m) {
      const Real below = m > 0 ? Real(s(m - 1, n)) : Real(0);
      const Real lhs = (Real(2) * (Real(n) - Real(m) * q) - u * u) * s(m, n);
      const Real rhs = u * root2 * (sqrt(Real(m)) * below + sqrt(Real(m + 1)) * s(m + 1, n));
      worst = std::max(worst, to_double(Real(abs(lhs - rhs))) / scale);
    }
  }
  return worst;
}

/// Build S column by column with the forward recurrence and the unit max-abs gauge.
template <class Real>
SimilaritySolution<Real> solve_similarity(const DeformParams& params, const SolveOptions& options = {}) {
  params.validate();
  params.require_solvable();
  using std::abs;
  using std::sqrt;

  const std::size_t dim = params.dim;
  const auto d = static_cast<Eigen::Index>(dim);
  require(options.extra_gauge.empty() || options.extra_gauge.size() == dim, ErrorKind::parameter,
          "extra gauge must have one factor per column");
  require(options.gauge_rows.empty() || options.gauge_rows.size() == dim, ErrorKind::parameter,
          "gauge rows must name one row per column");
  for (double g : options.extra_gauge)
    require(std::isfinite(g) && g > 0.0, ErrorKind::parameter, "gauge factors must be positive");

  SimilaritySolution<Real> sol;
  sol.q = params.q;
  sol.u = params.u;
  const Real q(params.q);
  const Real u(params.u);

  if (params.u == 0.0) {  // q == 1: S N S^-1 = N, the identity is a solution
    sol.trivial = true;
    sol.s = RMatrix<Real>::Identity(d, d);
    sol.column_gauge.assign(dim, Real(1));
    sol.peak_rows.resize(dim);
    for (std::size_t n = 0; n < dim; ++n) sol.peak_rows[n] = n;
    for (std::size_t n = 0; n < options.extra_gauge.size(); ++n) {
      sol.s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = Real(options.extra_gauge[n]);
      sol.column_gauge[n] = Real(options.extra_gauge[n]);
    }
    sol.sylvester_residual = sylvester_residuals<Real>(sol.s, q, u);
    sol.recurrence_residual = recurrence_residual<Real>(sol.s, q, u);
    if (options.estimate_condition) sol.condition = estimate_condition<Real>(sol.s);
    return sol;
  }

  const Real root2u = sqrt(Real(2)) * u;
  RMatrix<Real> s(d, d);
  std::optional<std::pair<Eigen::Index, Eigen::Index>> first_bad;
  for (Eigen::Index n = 0; n < d; ++n) {
    Real prev(0);
    Real cur(1);
    s(0, n) = cur;
    for (Eigen::Index m = 0; m + 1 < d; ++m) {
      if (first_bad && m + 1 >= first_bad->first) break;
      // Coefficients are divided out first so overflow means the entry itself is out of range.
      const Real denom = root2u * sqrt(Real(m + 1));
      const Real next = ((Real(2) * (Real(n) - Real(m) * q) - u * u) / denom) * cur -
                        (sqrt(Real(m)) / sqrt(Real(m + 1))) * prev;
      if (!is_finite(next)) {
        first_bad = std::make_pair(m + 1, n);
        break;
      }
      s(m + 1, n) = next;
      prev = cur;
      cur = next;
    }
  }
  if (first_bad)
    throw OverflowError(static_cast<std::size_t>(first_bad->first), static_cast<std::size_t>(first_bad->second));

  sol.column_gauge.resize(dim);
  sol.peak_rows.resize(dim);
  for (Eigen::Index n = 0; n < d; ++n) {
    Real peak(0);
    std::size_t peak_row = 0;
    for (Eigen::Index m = 0; m < d; ++m) {
      if (abs(s(m, n)) > peak) {
        peak = abs(s(m, n));
        peak_row = static_cast<std::size_t>(m);
      }
    }
    sol.peak_rows[static_cast<std::size_t>(n)] = peak_row;
    if (!options.gauge_rows.empty()) {
      const auto row = static_cast<Eigen::Index>(options.gauge_rows[static_cast<std::size_t>(n)]);
      require(row < d && s(row, n) != Real(0), ErrorKind::parameter, "gauge row entry is zero or out of range");
      peak = abs(s(row, n));
    }
    Real factor = Real(1) / peak;
    if (!options.extra_gauge.empty()) factor *= Real(options.extra_gauge[static_cast<std::size_t>(n)]);
    s.col(n) *= factor;
    sol.column_gauge[static_cast<std::size_t>(n)] = factor;
  }
  sol.s = std::move(s);

  sol.sylvester_residual = sylvester_residuals<Real>(sol.s, q, u);
  sol.recurrence_residual = recurrence_residual<Real>(sol.s, q, u);

  const double res_tol = params.resonance_tol();
  for (std::size_t m = 0; m < dim; ++m)
    for (std::size_t n = 0; n < dim; ++n)
      if (!recurrence_coefficients(m, n, params.q, params.u, res_tol)) sol.resonance_flags.emplace_back(m, n);

  if (options.estimate_condition) sol.condition = estimate_condition<Real>(sol.s);
  return sol;
}

template <class Real>
struct CertifiedInverse {
  RMatrix<Real> inverse;
  double residual = 0.0;  // ||S S^-1 - I||_max
};

/// S^-1 with the residual ||S S^-1 - I||_max certified below tol.inverse.
template <class Real>
CertifiedInverse<Real> invert_similarity(const SimilaritySolution<Real>& sol, double max_residual = 1e-6) {
  const auto d = sol.s.rows();
  const double cond = sol.condition ? sol.condition->full : std::numeric_limits<double>::quiet_NaN();
  if (sol.condition) require(std::isfinite(cond), ErrorKind::inversion, "condition estimate is not finite");
  CertifiedInverse<Real> out;
  out.inverse = sol.s.partialPivLu().inverse();
  out.residual = max_abs(RMatrix<Real>(sol.s * out.inverse - RMatrix<Real>::Identity(d, d)));
  if (!(out.residual <= max_residual)) throw InversionError(cond, out.residual);
  return out;
}

/// ||S^dagger S - I||_max on the leading D/2 block; zero only for a unitary S.
template <class Real>
double nonunitarity_certificate(const SimilaritySolution<Real>& sol) {
  const auto d = sol.s.rows();
  const auto half = std::max<Eigen::Index>(1, d / 2);
  const RMatrix<Real> gram = sol.s.transpose() * sol.s;
  return max_abs(RMatrix<Real>(gram - RMatrix<Real>::Identity(d, d)), half, half);
}

}  // namespace qdeform
