#pragma once

// Matrix exponentials for the one-parameter unitary groups.
//
// Two independent routes are provided:
//   * scaling and squaring with a diagonal Pade approximant (any scalar type);
//   * spectral evaluation through a Hermitian eigendecomposition.
// Each is used as the oracle of the other.

#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qdeform/errors.hpp"
#include "qdeform/scalar.hpp"

namespace qdeform {

namespace detail {

template <class T>
struct real_of {
  using type = T;
};
template <class T>
struct real_of<std::complex<T>> {
  using type = T;
};

struct PadeChoice {
  int degree;
  double theta;  // scale until ||X||_1 <= theta
};

// Higham's degree-13 choice for binary64; for wider types the degree is the
// smallest one whose truncation bound at ||X|| <= 1/2 is below the unit round-off.
template <class Real>
PadeChoice pade_choice() {
  if constexpr (std::is_same_v<Real, double>) {
    return {13, 5.371920351148152};
  } else {
    const double eps = to_double(std::numeric_limits<Real>::epsilon());
    const double theta = 0.5;
    for (int m = 3; m < 200; ++m) {
      // log of (m!)^2 / ((2m)! (2m+1)!) * theta^(2m+1)
      const double log_bound = 2.0 * std::lgamma(m + 1.0) - std::lgamma(2.0 * m + 1.0) -
                               std::lgamma(2.0 * m + 2.0) + (2.0 * m + 1.0) * std::log(theta);
      if (log_bound < std::log(eps) - std::log(10.0)) return {m, theta};
    }
    return {200, theta};
  }
}

}  // namespace detail

/// exp(X) by scaling and squaring with a diagonal Pade approximant.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> expm_pade(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x) {
  using Real = typename detail::real_of<Scalar>::type;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using std::ldexp;
  const auto n = x.rows();
  require(n == x.cols(), ErrorKind::dimension, "matrix exponential needs a square matrix");

  const detail::PadeChoice choice = detail::pade_choice<Real>();
  const double norm1 = to_double(Real(x.cwiseAbs().colwise().sum().maxCoeff()));
  int squarings = 0;
  if (norm1 > choice.theta) squarings = static_cast<int>(std::ceil(std::log2(norm1 / choice.theta)));
  const Matrix scaled = x * Scalar(Real(ldexp(1.0, -squarings)));

  // c_j = (2m - j)! m! / ((2m)! j! (m - j)!), built by the ratio c_j/c_{j-1}.
  const int m = choice.degree;
  std::vector<Real> c(static_cast<std::size_t>(m) + 1);
  c[0] = Real(1);
  for (int j = 1; j <= m; ++j) c[j] = c[j - 1] * Real(m - j + 1) / (Real(j) * Real(2 * m - j + 1));

  const Matrix eye = Matrix::Identity(n, n);
  Matrix power = eye;
  Matrix num = eye;
  Matrix den = eye;
  for (int j = 1; j <= m; ++j) {
    power = power * scaled;
    num += Scalar(c[j]) * power;
    den += Scalar((j % 2 == 0) ? c[j] : Real(-c[j])) * power;
  }
  Matrix result = den.partialPivLu().solve(num);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

/// exp(i s G) for Hermitian G through its eigendecomposition.
inline CMatrix expm_hermitian_eigen(const CMatrix& g, double s) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(g);
  require(eig.info() == Eigen::Success, ErrorKind::generator, "Hermitian eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  CVector phases(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) phases(k) = std::polar(1.0, s * lambda(k));
  const CMatrix& v = eig.eigenvectors();
  return v * phases.asDiagonal() * v.adjoint();
}

}  // namespace qdeform
