#pragma once

// Coordinate-representation study of S (Q^2 + P^2) = q (Q^2 + P^2) S + 2uQS + beta S
// with S the multiplication by f(x) = x:
//
//   psi'' + phi1(x) psi' + phi2(x) psi = 0,
//   phi1 = 2q/((q-1)x),  phi2 = -x^2 + (2ux + beta)/(1-q),  beta = u^2 - (q-1).
//
// x = 0 is a regular singular point (indicial roots 0 and -(q+1)/(q-1)); the
// point at infinity is irregular. Integration runs on x > 0; x < 0 follows from
// the reflection psi_u(-x) = psi_{-u}(x).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "qdeform/errors.hpp"

namespace qdeform {

struct OdeProblem {
  double q = 3.0;
  double u = 0.0;

  double beta() const { return u * u - (q - 1.0); }
  /// Residue of phi1 at the origin, 2q/(q-1).
  double p0() const { return 2.0 * q / (q - 1.0); }

  void validate() const {
    require(std::isfinite(q) && std::isfinite(u), ErrorKind::parameter, "ODE parameters must be finite");
    require(q != 1.0, ErrorKind::parameter,
            "the coordinate-representation ODE divides by q-1; q=1 is excluded");
  }
};

struct OdeCoefficients {
  double phi1;
  double phi2;
};

/// Values of an invertible multiplier f and its first two derivatives at x.
struct Jet {
  double f;
  double df;
  double d2f;
};

/// Coefficients for a general invertible multiplier f.
inline OdeCoefficients ode_coefficients(double x, const OdeProblem& problem, const Jet& f) {
  problem.validate();
  require(f.f != 0.0, ErrorKind::pole, "f vanishes at x=" + std::to_string(x) + "; coefficients have a pole");
  const double q = problem.q;
  const double phi1 = 2.0 * q / (q - 1.0) * f.df / f.f;
  const double phi2 = -x * x + (-q * f.d2f + 2.0 * problem.u * x * f.f + problem.beta() * f.f) / ((1.0 - q) * f.f);
  return {phi1, phi2};
}

/// Coefficients for f(x) = x.
inline OdeCoefficients ode_coefficients(double x, const OdeProblem& problem) {
  problem.validate();
  require(x != 0.0, ErrorKind::pole, "x=0 is the regular singular point; use the Frobenius series there");
  return {problem.p0() / x, -x * x + (2.0 * problem.u * x + problem.beta()) / (1.0 - problem.q)};
}

/// Roots of r(r-1) + p0 r = 0: (0, -(q+1)/(q-1)).
inline std::pair<double, double> indicial_exponents(double q) {
  OdeProblem{q, 0.0}.validate();
  return {0.0, -(q + 1.0) / (q - 1.0)};
}

/// r0: exponent 0 (analytic at the origin); r1: exponent -(q+1)/(q-1).
enum class Branch { r0, r1 };

inline std::string to_string(Branch b) { return b == Branch::r0 ? "r0" : "r1"; }

inline double branch_exponent(const OdeProblem& problem, Branch branch) {
  return branch == Branch::r0 ? 0.0 : indicial_exponents(problem.q).second;
}

/// Frobenius coefficients c_0..c_order for psi = x^r sum c_k x^k, c_0 = 1.
///
/// Multiplying the ODE by x^2 gives, with alpha = beta/(1-q), gamma = 2u/(1-q),
///   F(k+r) c_k = -(alpha c_{k-2} + gamma c_{k-3} - c_{k-4}),  F(s) = s(s - r2).
/// F(k+r) = 0 for some k >= 1 means the branch needs a logarithmic term.
inline std::vector<double> frobenius_coefficients(const OdeProblem& problem, Branch branch, unsigned order) {
  problem.validate();
  const double r2 = indicial_exponents(problem.q).second;
  const double r = branch_exponent(problem, branch);
  const double alpha = problem.beta() / (1.0 - problem.q);
  const double gamma = 2.0 * problem.u / (1.0 - problem.q);
  std::vector<double> c(order + 1, 0.0);
  c[0] = 1.0;
  for (unsigned k = 1; k <= order; ++k) {
    const double s = k + r;
    const double f = s * (s - r2);
    if (std::abs(f) < 1e-9 * (1.0 + s * s)) {
      throw Error(ErrorKind::branch_degenerate,
                  "Frobenius branch " + to_string(branch) + " is degenerate for q=" + std::to_string(problem.q) +
                      ": exponents differ by the integer " + std::to_string(k) +
                      "; a logarithmic solution would be required");
    }
    double rhs = 0.0;
    if (k >= 2) rhs += alpha * c[k - 2];
    if (k >= 3) rhs += gamma * c[k - 3];
    if (k >= 4) rhs -= c[k - 4];
    c[k] = -rhs / f;
  }
  return c;
}

struct SeriesValue {
  double psi;
  double dpsi;
  double d2psi;
};

inline constexpr double kSeriesRadius = 0.2;

/// Truncated Frobenius series and its first two derivatives at x.
inline SeriesValue frobenius_series(const OdeProblem& problem, Branch branch, unsigned order, double x) {
  require(order >= 8, ErrorKind::parameter, "Frobenius order must be at least 8");
  require(x != 0.0 && std::abs(x) <= kSeriesRadius, ErrorKind::parameter,
          "series evaluation needs 0 < |x| <= 0.2 (got x=" + std::to_string(x) + ")");
  const double r = branch_exponent(problem, branch);
  require(x > 0.0 || r == std::floor(r), ErrorKind::parameter,
          "non-integer Frobenius exponent needs x > 0; use the reflection for x < 0");
  const std::vector<double> c = frobenius_coefficients(problem, branch, order);
  SeriesValue v{0.0, 0.0, 0.0};
  for (unsigned k = 0; k <= order; ++k) {
    const double s = k + r;
    v.psi += c[k] * std::pow(x, s);
    v.dpsi += c[k] * s * std::pow(x, s - 1.0);
    v.d2psi += c[k] * s * (s - 1.0) * std::pow(x, s - 2.0);
  }
  return v;
}

enum class Stepper { dopri5, bulirsch_stoer };

inline std::string to_string(Stepper s) { return s == Stepper::dopri5 ? "dopri5" : "bulirsch_stoer"; }

enum class GrowthClass { decaying, growing };

inline std::string to_string(GrowthClass g) { return g == GrowthClass::growing ? "growing" : "decaying"; }

struct IntegrationOptions {
  Stepper method = Stepper::dopri5;
  double x_seed = 0.05;
  unsigned seed_order = 20;
  double rtol = 1e-12;
  double atol = 1e-14;
  double sample_step = 0.01;
  double checkpoint_ratio = 1.189207115002721;  // 2^(1/4)
  std::size_t max_steps = 200000;
};

struct OdeSolution {
  OdeProblem problem;
  Branch branch = Branch::r0;
  Stepper method = Stepper::dopri5;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> derivatives;
  GrowthClass growth = GrowthClass::growing;
  double envelope_slope = 0.0;
  std::vector<std::pair<double, double>> l2_partial;  // (L, integral of psi^2 from the seed to L)
};

/// Least-squares slope of log|psi| against x^2/2 over samples with lo <= |x| <= hi.
inline double envelope_slope(const std::vector<double>& grid, const std::vector<double>& values, double lo, double hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ax = std::abs(grid[i]);
    if (ax < lo || ax > hi || values[i] == 0.0) continue;
    const double xv = 0.5 * ax * ax;
    const double yv = std::log(std::abs(values[i]));
    sx += xv;
    sy += yv;
    sxx += xv * xv;
    sxy += xv * yv;
    ++n;
  }
  require(n >= 2, ErrorKind::parameter, "envelope fit needs at least two samples in the window");
  const double nn = static_cast<double>(n);
  return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

/// Cumulative trapezoid of psi^2 evaluated at geometric checkpoints.
inline std::vector<std::pair<double, double>> l2_partials(const std::vector<double>& grid,
                                                          const std::vector<double>& values, double ratio) {
  std::vector<std::pair<double, double>> out;
  if (grid.size() < 2) return out;
  const double start = std::abs(grid.front());
  const double end = std::abs(grid.back());
  double next = start * ratio;
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    acc += 0.5 * std::abs(grid[i] - grid[i - 1]) * (values[i] * values[i] + values[i - 1] * values[i - 1]);
    const double ax = std::abs(grid[i]);
    if (ax >= next - 1e-12 || i + 1 == grid.size()) {
      out.emplace_back(ax, acc);
      while (next <= ax + 1e-12) next *= ratio;
    }
  }
  if (out.back().first != end) out.emplace_back(end, acc);
  return out;
}

namespace detail {

using OdeState = std::array<double, 2>;

inline void classify(OdeSolution& sol) {
  const double end = std::abs(sol.grid.back());
  const double start = std::abs(sol.grid.front());
  const double lo = std::max(start, end - 1.0);
  sol.envelope_slope = envelope_slope(sol.grid, sol.values, lo, end);
  sol.growth = sol.envelope_slope > 0.0 ? GrowthClass::growing : GrowthClass::decaying;
}

}  // namespace detail

/// Integrate the initial-value problem psi(x0) = psi0, psi'(x0) = dpsi0 to x_end
/// (either direction; the interval must not contain 0), sampling every
/// options.sample_step.
inline OdeSolution integrate_from(const OdeProblem& problem, double x0, double psi0, double dpsi0, double x_end,
                                  const IntegrationOptions& options = {}) {
  problem.validate();
  require(x0 != 0.0 && x_end != x0 && (x0 > 0.0) == (x_end > 0.0), ErrorKind::parameter,
          "integration interval must lie on one side of the singular point x=0");
  namespace odeint = boost::numeric::odeint;
  const double p0 = problem.p0();
  const double beta = problem.beta();
  const double q = problem.q;
  const double u = problem.u;
  auto system = [=](const detail::OdeState& y, detail::OdeState& dydx, double x) {
    const double phi1 = p0 / x;
    const double phi2 = -x * x + (2.0 * u * x + beta) / (1.0 - q);
    dydx[0] = y[1];
    dydx[1] = -phi1 * y[1] - phi2 * y[0];
  };

  const double dir = x_end > x0 ? 1.0 : -1.0;
  std::vector<double> times;
  const double span = std::abs(x_end - x0);
  const auto steps = static_cast<std::size_t>(std::ceil(span / options.sample_step - 1e-9));
  for (std::size_t i = 0; i < steps; ++i) times.push_back(x0 + dir * options.sample_step * static_cast<double>(i));
  times.push_back(x_end);

  OdeSolution sol;
  sol.problem = problem;
  sol.method = options.method;
  auto observer = [&](const detail::OdeState& y, double x) {
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]))
      throw Error(ErrorKind::integrator, "non-finite state at x=" + std::to_string(x));
    sol.grid.push_back(x);
    sol.values.push_back(y[0]);
    sol.derivatives.push_back(y[1]);
  };

  detail::OdeState y{psi0, dpsi0};
  const double dt = dir * std::min(1e-3, options.sample_step);
  try {
    if (options.method == Stepper::dopri5) {
      auto stepper = odeint::make_dense_output(options.atol, options.rtol, odeint::runge_kutta_dopri5<detail::OdeState>());
      odeint::integrate_times(stepper, system, y, times.begin(), times.end(), dt, observer,
                              odeint::max_step_checker(options.max_steps));
    } else {
      odeint::bulirsch_stoer_dense_out<detail::OdeState> stepper(options.atol, options.rtol);
      odeint::integrate_times(stepper, system, y, times.begin(), times.end(), dt, observer,
                              odeint::max_step_checker(options.max_steps));
    }
  } catch (const odeint::odeint_error& e) {
    throw Error(ErrorKind::integrator, std::string("step-size collapse: ") + e.what());
  }
  require(sol.grid.size() == times.size(), ErrorKind::integrator, "integrator stopped before x_end");

  detail::classify(sol);
  sol.l2_partial = l2_partials(sol.grid, sol.values, options.checkpoint_ratio);
  return sol;
}

/// Seed from the Frobenius branch at x_seed and integrate outward to x_end.
inline OdeSolution integrate_psi(const OdeProblem& problem, Branch branch, double x_end,
                                 const IntegrationOptions& options = {}) {
  require(x_end > options.x_seed, ErrorKind::parameter,
          "x_end must exceed the series seed point " + std::to_string(options.x_seed));
  const SeriesValue seed = frobenius_series(problem, branch, options.seed_order, options.x_seed);
  OdeSolution sol = integrate_from(problem, options.x_seed, seed.psi, seed.dpsi, x_end, options);
  sol.branch = branch;
  return sol;
}

/// psi on [-x_end_abs, -x_seed] via psi_u(-x) = psi_{-u}(x); grid increasing.
inline OdeSolution reflect_to_negative_axis(const OdeProblem& problem, Branch branch, double x_end_abs,
                                            const IntegrationOptions& options = {}) {
  OdeSolution mirrored = integrate_psi(OdeProblem{problem.q, -problem.u}, branch, x_end_abs, options);
  mirrored.problem = problem;
  for (std::size_t i = 0; i < mirrored.grid.size(); ++i) {
    mirrored.grid[i] = -mirrored.grid[i];
    mirrored.derivatives[i] = -mirrored.derivatives[i];
  }
  std::reverse(mirrored.grid.begin(), mirrored.grid.end());
  std::reverse(mirrored.values.begin(), mirrored.values.end());
  std::reverse(mirrored.derivatives.begin(), mirrored.derivatives.end());
  return mirrored;
}

/// Coefficients of the equation for y(t) = psi(1/t):
///   y'' + ((2 - p0)/t) y' + (phi2(1/t)/t^4) y = 0.
inline OdeCoefficients infinity_coefficients(double t, const OdeProblem& problem) {
  const OdeCoefficients c = ode_coefficients(1.0 / t, problem);
  return {(2.0 - problem.p0()) / t, c.phi2 / (t * t * t * t)};
}

struct InfinityReport {
  double pole_order = 0.0;  // estimated order of the pole of the psi coefficient at t=0
  int fuchsian_bound = 2;
  bool fuchsian = true;
};

/// Pole order of the psi coefficient at t=0 from its log-log slope on t = 10^-k.
inline InfinityReport infinity_pole_order(const OdeProblem& problem, int k_lo = 3, int k_hi = 5) {
  const double t1 = std::pow(10.0, -k_lo);
  const double t2 = std::pow(10.0, -k_hi);
  const double c1 = std::abs(infinity_coefficients(t1, problem).phi2);
  const double c2 = std::abs(infinity_coefficients(t2, problem).phi2);
  InfinityReport r;
  r.pole_order = -(std::log(c2) - std::log(c1)) / (std::log(t2) - std::log(t1));
  r.fuchsian = std::round(r.pole_order) <= r.fuchsian_bound;
  return r;
}

struct ScanRow {
  double theta = 0.0;
  GrowthClass growth = GrowthClass::growing;
  double envelope_slope = 0.0;
  double l2_final = 0.0;
  double first_increment = 0.0;
  double last_increment = 0.0;
};

struct ScanReport {
  OdeProblem problem;
  double x_end = 0.0;
  bool second_branch_seedable = false;
  std::string note;
  std::vector<ScanRow> rows;
  std::optional<ScanRow> refined;  // mixture with the growing component removed at x_end
  bool any_decaying = false;
};

namespace detail {

inline ScanRow scan_row(double theta, const std::vector<double>& grid, const std::vector<double>& values,
                        double ratio) {
  ScanRow row;
  row.theta = theta;
  OdeSolution tmp;
  tmp.grid = grid;
  tmp.values = values;
  classify(tmp);
  row.growth = tmp.growth;
  row.envelope_slope = tmp.envelope_slope;
  const auto l2 = l2_partials(grid, values, ratio);
  row.l2_final = l2.back().second;
  row.first_increment = l2.front().second;
  row.last_increment = l2.size() >= 2 ? l2.back().second - l2[l2.size() - 2].second : l2.back().second;
  return row;
}

}  // namespace detail

/// Classify psi_theta = cos(theta) psi_r0 + sin(theta) psi_r1 over a grid of
/// mixing angles. Both branches are normalized to unit value at x_end, and the
/// refined angle cancels psi' + x psi at x_end, which suppresses the
/// exp(x^2/2) component.
inline ScanReport square_integrability_scan(const OdeProblem& problem, const std::vector<double>& thetas, double x_end,
                                            const IntegrationOptions& options = {}) {
  problem.validate();
  ScanReport report;
  report.problem = problem;
  report.x_end = x_end;

  const OdeSolution first = integrate_psi(problem, Branch::r0, x_end, options);
  std::optional<OdeSolution> second;
  try {
    second = integrate_psi(problem, Branch::r1, x_end, options);
    report.second_branch_seedable = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::branch_degenerate) throw;
    report.note = e.what();
  }

  const std::size_t n = first.grid.size();
  const double s0 = 1.0 / first.values.back();
  if (!second) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = first.values[i] * s0;
    report.rows.push_back(detail::scan_row(0.0, first.grid, v, options.checkpoint_ratio));
  } else {
    const double s1 = 1.0 / second->values.back();
    auto mix = [&](double theta) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i)
        v[i] = std::cos(theta) * s0 * first.values[i] + std::sin(theta) * s1 * second->values[i];
      return v;
    };
    for (double theta : thetas) report.rows.push_back(detail::scan_row(theta, first.grid, mix(theta), options.checkpoint_ratio));

    const double xe = first.grid.back();
    const double g0 = s0 * (first.derivatives.back() + xe * first.values.back());
    const double g1 = s1 * (second->derivatives.back() + xe * second->values.back());
    const double theta_star = std::atan2(-g0, g1);
    report.refined = detail::scan_row(theta_star, first.grid, mix(theta_star), options.checkpoint_ratio);
  }

  for (const auto& row : report.rows)
    if (row.growth == GrowthClass::decaying) report.any_decaying = true;
  if (report.refined && report.refined->growth == GrowthClass::decaying) report.any_decaying = true;
  return report;
}

}  // namespace qdeform
