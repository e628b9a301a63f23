#pragma once

// Report-level checks shared by the CLI and the acceptance run.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qdeform/dynamics.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/position_rep.hpp"
#include "qdeform/report.hpp"
#include "qdeform/unitary_flow.hpp"

namespace qdeform {

/// Ladder-algebra and displacement-flow identities at dimension dim and shift u.
inline std::vector<ReportEntry> operator_checks(std::size_t dim, double u, std::size_t block = 0) {
  detail::require_fock_dim(dim);
  const std::size_t k = block == 0 ? std::max<std::size_t>(1, dim / 2) : block;
  require(k <= dim, ErrorKind::dimension, "block larger than the dimension");
  const FockMatrix a = annihilation(dim);
  const FockMatrix ad = creation(dim);
  const FockMatrix n = number(dim);
  const FockMatrix q = position(dim);
  const FockMatrix p = momentum(dim);
  const FockMatrix id = identity(dim);
  const CMatrix eye = id.mat();

  std::vector<ReportEntry> out;
  out.push_back(gate("1.1", "[a,a^dagger] = I", dim - 1,
                     block_residual(commutator(a.mat(), ad.mat()), eye, BlockSpec::leading(dim - 1, dim)), 1e-12));
  const CMatrix half_sum = 0.5 * (q.mat() * q.mat() + p.mat() * p.mat() - eye);
  out.push_back(gate("1.1", "a^dagger a = (Q^2+P^2-I)/2", dim - 1,
                     block_residual(half_sum, n.mat(), BlockSpec::leading(dim - 1, dim)), 1e-13));

  const UnitaryFlow t = displacement(u, dim, ExpMethod::pade);
  const CMatrix tm = t.matrix.mat();
  const CMatrix t_eig = displacement(u, dim, ExpMethod::eigen).matrix.mat();
  const CMatrix t_half = displacement(0.5 * u, dim, ExpMethod::pade).matrix.mat();
  const CMatrix t_neg = displacement(-u, dim, ExpMethod::pade).matrix.mat();
  out.push_back(gate("3.1", "unitarity of T(u)", dim, t.unitarity_defect, 1e-10));
  out.push_back(gate("3.1", "group law T(u/2)T(u/2) = T(u)", dim, max_abs(CMatrix(t_half * t_half - tm)), 1e-12));
  out.push_back(gate("3.1", "T(u)^dagger = T(-u)", dim, max_abs(CMatrix(tm.adjoint() - t_neg)), 1e-12));
  out.push_back(gate("3.1", "Pade vs eigendecomposition", dim, max_abs(CMatrix(tm - t_eig)), 1e-11));
  out.push_back(gate("3.8", "T^dagger Q T = Q - uI", k,
                     block_residual(tm.adjoint() * q.mat() * tm, q.mat() - u * eye, BlockSpec::leading(k, dim)), 1e-8));
  out.push_back(gate("3.10", "T Q T^dagger = Q + uI", k,
                     block_residual(tm * q.mat() * tm.adjoint(), q.mat() + u * eye, BlockSpec::leading(k, dim)), 1e-8));
  out.push_back(gate("3.11", "T P = P T", dim, block_residual(tm * p.mat(), p.mat() * tm, BlockSpec::full(dim)), 1e-12));
  out.push_back(gate("3.12", "T N T^dagger = N + uQ + u^2/2 I", k,
                     block_residual(tm * n.mat() * tm.adjoint(), conjugated_number_analytic(u, dim).mat(),
                                    BlockSpec::leading(k, dim)),
                     1e-8));
  return out;
}

struct OdeReport {
  std::vector<ReportEntry> entries;
  OdeSolution primary;
  std::optional<OdeSolution> secondary;  // other stepper family, for the agreement check
  InfinityReport infinity;
};

/// Value of a sampled solution at x, linearly interpolated between samples.
inline double sample_at(const OdeSolution& sol, double x) {
  const auto& g = sol.grid;
  require(!g.empty() && x >= std::min(g.front(), g.back()) && x <= std::max(g.front(), g.back()),
          ErrorKind::parameter, "sample point outside the integrated range");
  std::size_t best = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g[i] - x) < std::abs(g[best] - x)) best = i;
  if (g[best] == x) return sol.values[best];
  std::size_t j = (x > g[best]) == (g.back() > g.front()) ? best + 1 : best - 1;
  j = std::min(j, g.size() - 1);
  const double w = (x - g[best]) / (g[j] - g[best]);
  return sol.values[best] + w * (sol.values[j] - sol.values[best]);
}

inline OdeReport ode_checks(const OdeProblem& problem, Branch branch, double x_end, Stepper method) {
  OdeReport rep;
  IntegrationOptions opts;
  opts.method = method;
  rep.primary = integrate_psi(problem, branch, x_end, opts);
  opts.method = method == Stepper::dopri5 ? Stepper::bulirsch_stoer : Stepper::dopri5;
  rep.secondary = integrate_psi(problem, branch, x_end, opts);

  const double x_cmp = std::min(3.0, x_end);
  const double v1 = sample_at(rep.primary, x_cmp);
  const double v2 = sample_at(*rep.secondary, x_cmp);
  const double rel = std::abs(v1 - v2) / std::max(std::abs(v1), std::abs(v2));
  rep.entries.push_back(gate("3.25", "dopri5 vs Bulirsch-Stoer at x=" + std::to_string(x_cmp) + " (relative)", 0, rel,
                             1e-6));
  rep.infinity = infinity_pole_order(problem);
  rep.entries.push_back(
      gate_above("3.25", "pole order of the psi coefficient at infinity (Fuchsian bound 2)", 0, rep.infinity.pole_order,
                 2.0));
  const auto [r1, r2] = indicial_exponents(problem.q);
  rep.entries.push_back(info("3.25", "indicial exponent r0", 0, r1));
  rep.entries.push_back(info("3.25", "indicial exponent r1", 0, r2));
  rep.entries.push_back(info("3.25", "envelope slope of log|psi| vs x^2/2 (last unit interval)", 0,
                             rep.primary.envelope_slope));
  rep.entries.push_back(
      info("3.25", "growth class (1 growing, 0 decaying)", 0, rep.primary.growth == GrowthClass::growing ? 1.0 : 0.0));
  rep.entries.push_back(info("3.25", "l2 partial integral at x_end", 0, rep.primary.l2_partial.back().second));
  rep.entries[0].norm = "relative";
  return rep;
}

struct ConvergencePanel {
  std::vector<double> steps;          // h values, coarse to fine
  std::vector<double> residual_a;     // max over frames
  std::vector<double> residual_b;
  std::vector<double> green_a;        // max deviation
  std::vector<double> green_b;
};

template <class Real>
ConvergencePanel convergence_panel(const Trajectory<Real>& fine) {
  ConvergencePanel panel;
  for (std::size_t stride : {4u, 2u, 1u}) {
    const Trajectory<Real> t = stride == 1 ? fine : coarsen(fine, stride);
    double ra = 0.0, rb = 0.0;
    for (const auto& r : modified_eom_residual(t)) {
      ra = std::max(ra, r.residual_a);
      rb = std::max(rb, r.residual_b);
    }
    panel.steps.push_back(t.h());
    panel.residual_a.push_back(ra);
    panel.residual_b.push_back(rb);
    panel.green_a.push_back(green_reconstruct(t, Which::a).max_deviation);
    panel.green_b.push_back(green_reconstruct(t, Which::b).max_deviation);
  }
  return panel;
}

inline bool panel_possible(const ParameterPath& path) {
  const std::size_t steps = path.steps();
  return steps % 4 == 0 && 4.0 * path.h <= path.t_end / 50.0 * (1.0 + 1e-12);
}

inline double ratio(double coarse, double fine) { return fine > 0.0 ? coarse / fine : 0.0; }

/// Residual, reconstruction and drift rows for a trajectory; the convergence
/// rows are added when the path supports two coarsenings by 2.
template <class Real>
std::vector<ReportEntry> dynamics_checks(const Trajectory<Real>& traj, const std::optional<ConvergencePanel>& panel) {
  std::vector<ReportEntry> out;
  const std::size_t k = traj.block;
  double ra = 0.0, rb = 0.0;
  for (const auto& r : modified_eom_residual(traj)) {
    ra = std::max(ra, r.residual_a);
    rb = std::max(rb, r.residual_b);
  }
  out.push_back(gate("4.7", "residual of (d/dt+i)A = S'S^-1 A + A T T'^dagger", k, ra, 1e-6));
  out.push_back(gate("4.9", "residual of (d/dt-i)B = B S dS^-1/dt + T'T^dagger B", k, rb, 1e-6));
  out.push_back(gate("4.7", "frame identities aT^dagger=S^-1A, Sa=AT, Ta^dagger=BS, a^dagger S^-1=T^dagger B", k,
                     frame_identity_residual(traj), 1e-8));
  out.push_back(gate("4.7", "assembly A = S a(t) T^dagger (relative)", traj.dim, assembly_residual(traj), 1e-12));
  double inv = 0.0, cond = 0.0;
  for (const auto& f : traj.frames) {
    inv = std::max(inv, f.inverse_residual);
    cond = std::max(cond, f.condition_1norm);
  }
  out.push_back(info("3.18", "max inverse residual over frames", traj.dim, inv));
  out.push_back(info("3.18", "max 1-norm condition of S over frames", traj.dim, cond));

  const GreenResult ga = green_reconstruct(traj, Which::a);
  const GreenResult gb = green_reconstruct(traj, Which::b);
  out.push_back(gate("5.4–5.7", "retarded reconstruction of A, max deviation", k, ga.max_deviation, 1e-4));
  out.push_back(gate("5.4–5.7", "retarded reconstruction of B, max deviation", k, gb.max_deviation, 1e-4));

  const std::vector<double> drift = commutator_drift(traj);
  out.push_back(info("5.4–5.7", "commutator drift at t=0", k, drift.front()));
  out.push_back(info("5.4–5.7", "commutator drift at t_end", k, drift.back()));
  out.push_back(info("5.4–5.7", "commutator drift max over t", k, *std::max_element(drift.begin(), drift.end())));

  if (panel) {
    const auto& p = *panel;
    for (std::size_t i = 0; i + 1 < p.steps.size(); ++i) {
      const std::string step = " (h " + std::to_string(p.steps[i]) + " -> " + std::to_string(p.steps[i + 1]) + ")";
      const double r_a = ratio(p.residual_a[i], p.residual_a[i + 1]);
      const double r_b = ratio(p.residual_b[i], p.residual_b[i + 1]);
      auto in_band = [&](const std::string& tag, const std::string& name, double r) {
        ReportEntry e = gate(tag, name + " halving ratio |r-4|" + step, k, std::abs(r - 4.0), 1.0);
        e.norm = "none";
        out.push_back(e);
        ReportEntry v = info(tag, name + " halving ratio" + step, k, r);
        v.norm = "none";
        out.push_back(v);
      };
      in_band("4.7", "residual_A", r_a);
      in_band("4.9", "residual_B", r_b);
      out.push_back(gate_above("5.4–5.7", "reconstruction of A refinement ratio" + step, k,
                               ratio(p.green_a[i], p.green_a[i + 1]), 3.0));
      out.push_back(gate_above("5.4–5.7", "reconstruction of B refinement ratio" + step, k,
                               ratio(p.green_b[i], p.green_b[i + 1]), 3.0));
    }
  }
  return out;
}

}  // namespace qdeform
