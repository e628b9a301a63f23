#pragma once

// Scalar and matrix aliases shared by every module.
//
// The similarity pipeline is templated on its real scalar. `double` is the
// binary64 instantiation; `Wide` carries 100 decimal digits, which the
// similarity operator needs because its condition number grows roughly like
// 10^(D-3) in the truncation dimension D.

#include <cmath>
#include <complex>
#include <limits>
#include <type_traits>

#include <Eigen/Dense>
#include <boost/multiprecision/mpfr.hpp>

namespace qdeform {

using Wide = boost::multiprecision::number<
    boost::multiprecision::mpfr_float_backend<100, boost::multiprecision::allocate_stack>,
    boost::multiprecision::et_off>;

}  // namespace qdeform

namespace Eigen {

template <>
struct NumTraits<qdeform::Wide> : GenericNumTraits<qdeform::Wide> {
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8,
  };
  static qdeform::Wide dummy_precision() { return qdeform::Wide(1000) * epsilon(); }
};

}  // namespace Eigen

namespace qdeform {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

template <class Real>
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <class Real>
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <class Real>
double to_double(const Real& x) {
  return static_cast<double>(x);
}

template <class Real>
bool is_finite(const Real& x) {
  if constexpr (std::is_floating_point_v<Real>) {
    return std::isfinite(x);
  } else {
    return boost::multiprecision::isfinite(x);
  }
}

template <class Real>
int decimal_digits() {
  return std::numeric_limits<Real>::digits10;
}

/// Max-abs over the leading rows x cols block, returned in binary64.
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& expr, Eigen::Index rows, Eigen::Index cols) {
  using std::abs;
  // Product expressions would otherwise be re-evaluated per coefficient.
  const auto& x = expr.eval();
  double best = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = to_double(abs(x(i, j)));
      if (std::isnan(v)) return v;
      if (v > best) best = v;
    }
  }
  return best;
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& x) {
  return max_abs(x, x.rows(), x.cols());
}

template <class Real>
CMatrix to_complex(const RMatrix<Real>& x) {
  CMatrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = Complex(to_double(x(i, j)), 0.0);
  return out;
}

}  // namespace qdeform
