#pragma once

// The non-canonical pair A = S a T^-1, B = T a^dagger S^-1, its commutator
// chain, and the bracket functions of the deformed oscillator.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qdeform/errors.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/report.hpp"
#include "qdeform/scalar.hpp"
#include "qdeform/similarity.hpp"
#include "qdeform/unitary_flow.hpp"

namespace qdeform {

template <class Real>
struct DeformedPair {
  RMatrix<Real> a_op;  // A
  RMatrix<Real> b_op;  // B
  DeformParams params;
  double adjoint_defect = 0.0;  // ||B - A^dagger||_max on the leading K block

  FockMatrix fock_a() const { return FockMatrix::from_real(a_op, "A"); }
  FockMatrix fock_b() const { return FockMatrix::from_real(b_op, "B"); }
};

/// A = S a T^dagger and B = T a^dagger S^-1 (T is orthogonal, so T^-1 = T^T).
template <class Real>
DeformedPair<Real> build_pair(const SimilaritySolution<Real>& sol, const CertifiedInverse<Real>& inverse,
                              const RealDisplacement<Real>& flow, const DeformParams& params) {
  require(sol.dim() == static_cast<std::size_t>(flow.matrix.rows()), ErrorKind::dimension,
          "similarity operator and displacement flow differ in dimension");
  require(flow.u == sol.u, ErrorKind::parameter, "displacement parameter differs from the similarity solve");
  const std::size_t dim = sol.dim();
  const RMatrix<Real> a = lowering<Real>(dim);
  DeformedPair<Real> pair;
  pair.params = params;
  pair.a_op = (sol.s * a) * flow.matrix.transpose();
  pair.b_op = flow.matrix * (a.transpose() * inverse.inverse);
  const auto k = static_cast<Eigen::Index>(params.block());
  pair.adjoint_defect = max_abs(RMatrix<Real>(pair.b_op - pair.a_op.transpose()), k, k);
  return pair;
}

template <class Real>
DeformedPair<Real> build_pair(const SimilaritySolution<Real>& sol, const RealDisplacement<Real>& flow,
                              const DeformParams& params) {
  return build_pair(sol, invert_similarity(sol, params.tol.inverse), flow, params);
}

/// Residuals of the commutator chain on the leading K block.
struct ChainResiduals {
  std::size_t block = 0;
  double deformed_commutator = 0.0;  // [A,B] vs I + (q-1)N
  double conjugation_form = 0.0;     // [A,B] vs I + S N S^-1 - T N T^-1
  double consistency = 0.0;          // S N S^-1 vs T N T^-1 + (q-1)N
  double product_form = 0.0;         // [A,B] vs S a a^dagger S^-1 - T a^dagger a T^-1 (exact on the truncation)
  double boundary_term = 0.0;        // D * S e_{D-1} e_{D-1}^T S^-1, the truncation remainder of the conjugation form
  double boundary_corrected = 0.0;   // conjugation form with the boundary term restored
  double recover_a = 0.0;            // a vs S^-1 A T
  double recover_a_dag = 0.0;        // a^dagger vs T^dagger B S
  double adjoint_defect = 0.0;
};

template <class Real>
ChainResiduals chain_residuals(const SimilaritySolution<Real>& sol, const CertifiedInverse<Real>& inverse,
                               const RealDisplacement<Real>& flow, const DeformedPair<Real>& pair) {
  const std::size_t dim = sol.dim();
  const auto d = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(pair.params.block());
  const Real qm1 = Real(pair.params.q) - Real(1);

  const RMatrix<Real> eye = RMatrix<Real>::Identity(d, d);
  const RMatrix<Real> n_op = number_diag<Real>(dim);
  const RMatrix<Real> a = lowering<Real>(dim);
  const RMatrix<Real>& s = sol.s;
  const RMatrix<Real>& s_inv = inverse.inverse;
  const RMatrix<Real>& t = flow.matrix;

  const RMatrix<Real> comm = pair.a_op * pair.b_op - pair.b_op * pair.a_op;
  const RMatrix<Real> sns = s * n_op * s_inv;
  const RMatrix<Real> tnt = t * n_op * t.transpose();
  const RMatrix<Real> boundary = Real(static_cast<double>(dim)) * s.col(d - 1) * s_inv.row(d - 1);

  ChainResiduals r;
  r.block = pair.params.block();
  r.deformed_commutator = max_abs(RMatrix<Real>(comm - eye - qm1 * n_op), k, k);
  r.conjugation_form = max_abs(RMatrix<Real>(comm - (eye + sns - tnt)), k, k);
  r.consistency = max_abs(RMatrix<Real>(sns - tnt - qm1 * n_op), k, k);
  r.product_form = max_abs(RMatrix<Real>(comm - (s * (a * a.transpose()) * s_inv - tnt)), k, k);
  r.boundary_term = max_abs(boundary, k, k);
  r.boundary_corrected = max_abs(RMatrix<Real>(comm - (eye + sns - tnt) + boundary), k, k);
  r.recover_a = max_abs(RMatrix<Real>(s_inv * pair.a_op * t - a), k, k);
  r.recover_a_dag = max_abs(RMatrix<Real>(t.transpose() * pair.b_op * s - a.transpose()), k, k);
  r.adjoint_defect = pair.adjoint_defect;
  return r;
}

/// a a^dagger - q a^dagger a.
inline FockMatrix deformed_commutator_q(const FockMatrix& a, const FockMatrix& a_dag, double q) {
  require(a.dim() == a_dag.dim(), ErrorKind::dimension, "ladder operators differ in dimension");
  return FockMatrix(a.mat() * a_dag.mat() - q * (a_dag.mat() * a.mat()), "[a,a_dag]_q");
}

/// [n] = (q^n - 1)/(q - 1), continued through q = 1 by its Taylor series.
inline double q_bracket(unsigned n, double q) {
  require(q > 0.0, ErrorKind::parameter, "q-bracket needs q > 0");
  const double nn = static_cast<double>(n);
  const double eps = q - 1.0;
  if (std::abs(eps) < 1e-8)
    return nn + eps * nn * (nn - 1.0) / 2.0 + eps * eps * nn * (nn - 1.0) * (nn - 2.0) / 6.0;
  return std::expm1(nn * std::log(q)) / eps;
}

/// [n] = n + (q - 1) n (n - 1)/2, the polynomial deformation realized by [A,B].
template <class Real = double>
Real poly_bracket(unsigned n, const Real& q) {
  const Real nn(n);
  return nn + (q - Real(1)) * nn * (nn - Real(1)) / Real(2);
}

enum class Bracket { q_number, polynomial };

inline double bracket_value(Bracket kind, unsigned n, double q) {
  return kind == Bracket::q_number ? q_bracket(n, q) : poly_bracket(n, q);
}

/// b |n> = sqrt([n]) |n-1>, i.e. a -> sqrt([N]/N) a with 0/0 at n = 0 resolved.
inline std::pair<FockMatrix, FockMatrix> nonlinear_map(Bracket kind, std::size_t dim, double q) {
  detail::require_fock_dim(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix b = CMatrix::Zero(d, d);
  for (std::size_t n = 0; n <= dim; ++n) {
    const double value = bracket_value(kind, static_cast<unsigned>(n), q);
    require(value >= 0.0, ErrorKind::parameter,
            "bracket [" + std::to_string(n) + "] = " + std::to_string(value) +
                " is negative for q=" + std::to_string(q) + "; the map is undefined");
    if (n >= 1 && n < dim) b(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(value);
  }
  return {FockMatrix(b, "b"), FockMatrix(b.adjoint(), "b_conj")};
}

template <class Real>
struct ChainVerification {
  SimilaritySolution<Real> solution;
  CertifiedInverse<Real> inverse;
  RealDisplacement<Real> flow;
  DeformedPair<Real> pair;
  ChainResiduals residuals;
  std::vector<ReportEntry> entries;
};

/// Solve S, build (A, B), and tabulate every identity of the commutator chain.
template <class Real>
ChainVerification<Real> verify_chain(const DeformParams& params) {
  params.validate();
  params.require_solvable();
  SimilaritySolution<Real> sol = solve_similarity<Real>(params);
  CertifiedInverse<Real> inverse = invert_similarity(sol, params.tol.inverse);
  RealDisplacement<Real> flow = real_displacement<Real>(params.u, params.dim);
  DeformedPair<Real> pair = build_pair(sol, inverse, flow, params);
  ChainResiduals res = chain_residuals(sol, inverse, flow, pair);

  const std::size_t dim = params.dim;
  const std::size_t k = params.block();
  const Tolerances& tol = params.tol;
  std::vector<ReportEntry> e;

  const FockMatrix a = annihilation(dim);
  const FockMatrix ad = creation(dim);
  const CMatrix nq = deformed_commutator_q(a, ad, params.q).mat();
  const CMatrix ccr = commutator(a, ad).mat();
  e.push_back(gate("1.1", "q=1 bracket equals I", dim - 1,
                   block_residual(deformed_commutator_q(a, ad, 1.0).mat(), identity(dim).mat(), BlockSpec{dim - 1}),
                   1e-12));
  e.push_back(gate("2.1", "q-bracket rearrangement", dim,
                   max_abs(CMatrix(nq - (ccr - (params.q - 1.0) * number(dim).mat()))), 1e-12));
  e.push_back(gate("2.4", "[A,B] = I + (q-1)N", k, res.deformed_commutator, tol.chain));
  e.push_back(gate("2.8", "[A,B] = I + SNS^-1 - TNT^-1", k, res.conjugation_form, tol.chain_exact));
  e.push_back(info("2.8", "truncation boundary term D*S|D-1><D-1|S^-1", k, res.boundary_term));
  e.push_back(info("2.8", "[A,B] with boundary term restored", k, res.boundary_corrected));
  e.push_back(gate("2.9", "SNS^-1 = TNT^-1 + (q-1)N", k, res.consistency, tol.chain));
  e.push_back(gate("3.18", "Sylvester rows 0..D-2 (relative)", dim - 1, sol.max_sylvester_residual(), tol.sylvester));
  e.push_back(gate("3.18", "recurrence re-substitution (relative)", dim - 1, sol.recurrence_residual, tol.recurrence));
  e.push_back(gate("3.18", "inverse residual ||S S^-1 - I||", dim, inverse.residual, tol.inverse));
  e.push_back(info("3.18", "condition(S) full", dim, sol.condition ? sol.condition->full : 0.0));
  e.push_back(info("3.18", "condition(S) leading D/2", dim / 2, sol.condition ? sol.condition->interior : 0.0));
  e.push_back(info("3.18", "resonances flagged", dim, static_cast<double>(sol.resonance_flags.size())));
  e.push_back(gate("3.1", "unitarity of T(u)", dim, flow.unitarity_defect, 1e-10));
  e.push_back(info("2.4", "adjoint defect ||B - A^dagger||", k, res.adjoint_defect));
  e.push_back(gate("2.4", "a = S^-1 A T", k, res.recover_a, 1e-8));
  e.push_back(gate("2.4", "a^dagger = T^dagger B S", k, res.recover_a_dag, 1e-8));

  const auto [b, b_conj] = nonlinear_map(Bracket::polynomial, dim, params.q);
  const CMatrix target = identity(dim).mat() + (params.q - 1.0) * number(dim).mat();
  e.push_back(gate("§2-map", "[b,b_conj] = I + (q-1)N, polynomial bracket", dim - 1,
                   block_residual(commutator(b, b_conj).mat(), target, BlockSpec{dim - 1}), 1e-12));

  return ChainVerification<Real>{std::move(sol), std::move(inverse), std::move(flow),
                                 std::move(pair), res,            std::move(e)};
}

}  // namespace qdeform
