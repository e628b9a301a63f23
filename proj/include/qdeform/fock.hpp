#pragma once

// Truncated Fock-space representations of the oscillator operators.
//
// Basis |0>..|D-1>, hard cutoff a^dagger|D-1> = 0. Every truncation artifact of
// a, a^dagger, N, Q, P therefore sits in the last row/column, and identities
// are compared on a leading block (BlockSpec).

#include <cstddef>
#include <string>
#include <utility>

#include "qdeform/errors.hpp"
#include "qdeform/scalar.hpp"

namespace qdeform {

/// Dense complex D x D operator with a free-form label.
class FockMatrix {
 public:
  FockMatrix() = default;

  FockMatrix(CMatrix entries, std::string label) : entries_(std::move(entries)), label_(std::move(label)) {
    require(entries_.rows() == entries_.cols() && entries_.rows() > 0, ErrorKind::dimension,
            "FockMatrix '" + label_ + "' must be square and non-empty");
    require(entries_.allFinite(), ErrorKind::parameter,
            "FockMatrix '" + label_ + "' has non-finite entries");
  }

  template <class Real>
  static FockMatrix from_real(const RMatrix<Real>& entries, std::string label) {
    return FockMatrix(to_complex(entries), std::move(label));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const std::string& label() const noexcept { return label_; }
  const CMatrix& mat() const noexcept { return entries_; }
  Complex operator()(Eigen::Index m, Eigen::Index n) const { return entries_(m, n); }

  operator const CMatrix&() const noexcept { return entries_; }

 private:
  CMatrix entries_;
  std::string label_;
};

/// Leading K x K block on which residuals are measured.
struct BlockSpec {
  std::size_t size = 0;

  static BlockSpec full(std::size_t dim) { return BlockSpec{dim}; }
  static BlockSpec leading(std::size_t k, std::size_t dim) {
    require(k >= 1 && k <= dim, ErrorKind::dimension,
            "block size " + std::to_string(k) + " must lie in [1, " + std::to_string(dim) + "]");
    return BlockSpec{k};
  }
};

enum class Norm { max_abs, spectral };

namespace detail {

inline void require_fock_dim(std::size_t dim) {
  require(dim >= 2, ErrorKind::dimension,
          "truncation dimension must satisfy D >= 2 (got D=" + std::to_string(dim) + ")");
}

}  // namespace detail

// Real-scalar builders used by the templated pipeline.

template <class Real>
RMatrix<Real> lowering(std::size_t dim) {
  detail::require_fock_dim(dim);
  using std::sqrt;
  const auto d = static_cast<Eigen::Index>(dim);
  RMatrix<Real> a = RMatrix<Real>::Zero(d, d);
  for (Eigen::Index m = 0; m + 1 < d; ++m) a(m, m + 1) = sqrt(Real(m + 1));
  return a;
}

template <class Real>
RMatrix<Real> raising(std::size_t dim) {
  return lowering<Real>(dim).transpose();
}

template <class Real>
RMatrix<Real> number_diag(std::size_t dim) {
  detail::require_fock_dim(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  RMatrix<Real> n = RMatrix<Real>::Zero(d, d);
  for (Eigen::Index m = 0; m < d; ++m) n(m, m) = Real(m);
  return n;
}

/// Q = (a + a^dagger)/sqrt(2); real symmetric tridiagonal.
template <class Real>
RMatrix<Real> position_real(std::size_t dim) {
  using std::sqrt;
  const RMatrix<Real> a = lowering<Real>(dim);
  return (a + a.transpose()) / sqrt(Real(2));
}

// Complex operators of the public contract.

inline FockMatrix annihilation(std::size_t dim) {
  return FockMatrix::from_real(lowering<double>(dim), "a");
}

inline FockMatrix creation(std::size_t dim) {
  return FockMatrix::from_real(raising<double>(dim), "a_dag");
}

inline FockMatrix number(std::size_t dim) {
  return FockMatrix::from_real(number_diag<double>(dim), "N");
}

inline FockMatrix position(std::size_t dim) {
  return FockMatrix::from_real(position_real<double>(dim), "Q");
}

/// P = i (a^dagger - a)/sqrt(2), so that a = (Q + iP)/sqrt(2).
inline FockMatrix momentum(std::size_t dim) {
  const RMatrix<double> a = lowering<double>(dim);
  const CMatrix p = Complex(0.0, 1.0 / std::sqrt(2.0)) * to_complex<double>(a.transpose() - a);
  return FockMatrix(p, "P");
}

inline FockMatrix identity(std::size_t dim) {
  detail::require_fock_dim(dim);
  const auto d = static_cast<Eigen::Index>(dim);
  return FockMatrix(CMatrix::Identity(d, d), "I");
}

template <class Derived1, class Derived2>
auto commutator(const Eigen::MatrixBase<Derived1>& x, const Eigen::MatrixBase<Derived2>& y) {
  using Plain = typename Derived1::PlainObject;
  require(x.rows() == y.rows() && x.cols() == y.cols() && x.rows() == x.cols(), ErrorKind::dimension,
          "commutator operands must be square with equal dimensions");
  Plain out = x * y - y * x;
  return out;
}

inline FockMatrix commutator(const FockMatrix& x, const FockMatrix& y) {
  require(x.dim() == y.dim(), ErrorKind::dimension,
          "commutator of '" + x.label() + "' (D=" + std::to_string(x.dim()) + ") and '" + y.label() +
              "' (D=" + std::to_string(y.dim()) + ")");
  return FockMatrix(commutator(x.mat(), y.mat()), "[" + x.label() + "," + y.label() + "]");
}

/// Norm of (x - y) on the leading K x K block.
inline double block_residual(const CMatrix& x, const CMatrix& y, BlockSpec block, Norm norm = Norm::max_abs) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), ErrorKind::dimension,
          "block_residual operands differ in dimension");
  const auto k = static_cast<Eigen::Index>(block.size);
  require(k >= 1 && k <= x.rows() && k <= x.cols(), ErrorKind::dimension,
          "block size " + std::to_string(block.size) + " exceeds operand dimension");
  const CMatrix diff = (x - y).topLeftCorner(k, k);
  if (norm == Norm::max_abs) return max_abs(diff);
  return Eigen::JacobiSVD<CMatrix>(diff).singularValues()(0);
}

template <class Real>
double block_residual(const RMatrix<Real>& x, const RMatrix<Real>& y, BlockSpec block) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), ErrorKind::dimension,
          "block_residual operands differ in dimension");
  const auto k = static_cast<Eigen::Index>(block.size);
  require(k >= 1 && k <= x.rows(), ErrorKind::dimension, "block size exceeds operand dimension");
  return max_abs((x - y).topLeftCorner(k, k));
}

}  // namespace qdeform
