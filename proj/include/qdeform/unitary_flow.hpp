#pragma once

// One-parameter unitary groups U(s) = exp(i s G) on the truncation, and the
// displacement flow T(u) = exp(i u P) with its conjugation identities.

#include <cstddef>
#include <string>

#include <Eigen/Eigenvalues>

#include "qdeform/errors.hpp"
#include "qdeform/expm.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/scalar.hpp"

namespace qdeform {

enum class ExpMethod { pade, eigen };

inline constexpr double kHermitianTolerance = 1e-10;

struct UnitaryFlow {
  FockMatrix generator;
  double parameter = 0.0;
  FockMatrix matrix;
  double unitarity_defect = 0.0;  // max-abs of T^dagger T - I
};

inline double hermitian_defect(const CMatrix& g) { return max_abs(g - g.adjoint()); }

inline double unitarity_defect(const CMatrix& t) {
  return max_abs(t.adjoint() * t - CMatrix::Identity(t.rows(), t.cols()));
}

/// exp(i s G) for a Hermitian generator.
inline FockMatrix exponentiate(const FockMatrix& generator, double s, ExpMethod method = ExpMethod::pade) {
  const double defect = hermitian_defect(generator.mat());
  require(defect <= kHermitianTolerance, ErrorKind::generator,
          "generator '" + generator.label() + "' is not Hermitian (defect " + std::to_string(defect) + ")");
  const std::string label = "exp(i*" + std::to_string(s) + "*" + generator.label() + ")";
  if (method == ExpMethod::eigen) return FockMatrix(expm_hermitian_eigen(generator.mat(), s), label);
  const CMatrix x = Complex(0.0, s) * generator.mat();
  return FockMatrix(expm_pade<Complex>(x), label);
}

inline UnitaryFlow stone_flow(const FockMatrix& generator, double s, ExpMethod method = ExpMethod::pade) {
  FockMatrix t = exponentiate(generator, s, method);
  const double defect = unitarity_defect(t.mat());
  return UnitaryFlow{generator, s, std::move(t), defect};
}

/// T(u) = exp(i u P).
inline UnitaryFlow displacement(double u, std::size_t dim, ExpMethod method = ExpMethod::pade) {
  UnitaryFlow flow = stone_flow(momentum(dim), u, method);
  flow.matrix = FockMatrix(flow.matrix.mat(), "T(" + std::to_string(u) + ")");
  return flow;
}

/// N + u Q + (u^2/2) I assembled directly; the exact T N T^dagger on the
/// untruncated space.
inline FockMatrix conjugated_number_analytic(double u, std::size_t dim) {
  const CMatrix m = number(dim).mat() + u * position(dim).mat() +
                    (0.5 * u * u) * CMatrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  return FockMatrix(m, "N+uQ+u^2/2");
}

/// Real form of the displacement flow for the wide-precision pipeline.
///
/// i u P = u (a - a^dagger)/sqrt(2) is real antisymmetric, so T(u) is real
/// orthogonal. P is unitarily equivalent to Q through W = diag(i^m), hence
/// T(u) = W exp(i u Q) W^dagger, and with Q = V diag(lambda) V^T the entries are
///   T(m,n) = Re( i^(m-n) [V cos(u lambda) V^T + i V sin(u lambda) V^T](m,n) ).
/// The eigendecomposition of the tridiagonal Q is computed once per dimension.
template <class Real>
class DisplacementKernel {
 public:
  explicit DisplacementKernel(std::size_t dim) : dim_(dim) {
    detail::require_fock_dim(dim);
    using std::sqrt;
    const auto d = static_cast<Eigen::Index>(dim);
    RVector<Real> diag = RVector<Real>::Zero(d);
    RVector<Real> sub(d - 1);
    for (Eigen::Index m = 0; m + 1 < d; ++m) sub(m) = sqrt(Real(m + 1)) / sqrt(Real(2));
    Eigen::SelfAdjointEigenSolver<RMatrix<Real>> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    require(eig.info() == Eigen::Success, ErrorKind::generator, "eigendecomposition of Q failed");
    eigenvalues_ = eig.eigenvalues();
    eigenvectors_ = eig.eigenvectors();
  }

  std::size_t dim() const noexcept { return dim_; }

  RMatrix<Real> operator()(const Real& u) const {
    using std::cos;
    using std::sin;
    const auto d = static_cast<Eigen::Index>(dim_);
    if (u == Real(0)) return RMatrix<Real>::Identity(d, d);
    RVector<Real> c(d);
    RVector<Real> s(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      c(k) = cos(u * eigenvalues_(k));
      s(k) = sin(u * eigenvalues_(k));
    }
    const RMatrix<Real> vc = eigenvectors_ * c.asDiagonal();
    const RMatrix<Real> vs = eigenvectors_ * s.asDiagonal();
    const RMatrix<Real> cos_part = vc * eigenvectors_.transpose();
    const RMatrix<Real> sin_part = vs * eigenvectors_.transpose();
    RMatrix<Real> t(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
      for (Eigen::Index m = 0; m < d; ++m) {
        switch (((m - n) % 4 + 4) % 4) {
          case 0: t(m, n) = cos_part(m, n); break;
          case 1: t(m, n) = -sin_part(m, n); break;
          case 2: t(m, n) = -cos_part(m, n); break;
          default: t(m, n) = sin_part(m, n); break;
        }
      }
    }
    return t;
  }

 private:
  std::size_t dim_;
  RVector<Real> eigenvalues_;
  RMatrix<Real> eigenvectors_;
};

/// exp(u (a - a^dagger)/sqrt(2)) by Pade scaling and squaring in Real.
template <class Real>
RMatrix<Real> displacement_real_pade(const Real& u, std::size_t dim) {
  using std::sqrt;
  const RMatrix<Real> a = lowering<Real>(dim);
  const RMatrix<Real> x = (a - a.transpose()) * (u / sqrt(Real(2)));
  return expm_pade<Real>(x);
}

}  // namespace qdeform

namespace qdeform {

/// Displacement flow in the real scalar of the similarity pipeline.
template <class Real>
struct RealDisplacement {
  double u = 0.0;
  RMatrix<Real> matrix;
  double unitarity_defect = 0.0;
};

template <class Real>
RealDisplacement<Real> real_displacement(const DisplacementKernel<Real>& kernel, double u) {
  RealDisplacement<Real> out{u, kernel(Real(u)), 0.0};
  const auto d = out.matrix.rows();
  out.unitarity_defect =
      max_abs(RMatrix<Real>(out.matrix.transpose() * out.matrix - RMatrix<Real>::Identity(d, d)));
  return out;
}

template <class Real>
RealDisplacement<Real> real_displacement(double u, std::size_t dim) {
  return real_displacement(DisplacementKernel<Real>(dim), u);
}

}  // namespace qdeform
