#pragma once

// Dense Hermitian linear algebra. Every matrix function in the library goes
// through a Hermitian eigendecomposition; spectra of reduced covariance
// matrices span many decades near 0 and 1, where series expansions fail.

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "markovgap/errors.hpp"

namespace markovgap {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr cplx kI{0.0, 1.0};

namespace linalg {

struct Eigh {
  RealVector values;  // ascending
  Matrix vectors;     // columns are orthonormal eigenvectors
};

namespace detail {

inline void check_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw ValidationError(std::string(what) + ": matrix is not square");
  }
}

inline void run_zheevd(char jobz, Matrix& a, RealVector& w) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  if (n == 0) return;
  const lapack_int info =
      LAPACKE_zheevd(LAPACK_COL_MAJOR, jobz, 'L', n, a.data(), n, w.data());
  if (info != 0) {
    throw NumericError("zheevd failed with info = " + std::to_string(info));
  }
}

}  // namespace detail

/// Full eigendecomposition of a Hermitian matrix. Only the lower triangle is
/// read.
inline Eigh eigh(const Matrix& a) {
  detail::check_square(a, "eigh");
  Eigh out;
  out.vectors = a;
  detail::run_zheevd('V', out.vectors, out.values);
  return out;
}

/// Eigenvalues only, ascending.
inline RealVector eigvalsh(const Matrix& a) {
  detail::check_square(a, "eigvalsh");
  Matrix work = a;
  RealVector w;
  detail::run_zheevd('N', work, w);
  return w;
}

/// Eigenvalues of a real symmetric matrix, ascending.
inline RealVector eigvalsh(const RealMatrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("eigvalsh: matrix is not square");
  RealMatrix work = a;
  const auto n = static_cast<lapack_int>(a.rows());
  RealVector w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(), n, w.data());
  if (info != 0) throw NumericError("dsyevd failed with info = " + std::to_string(info));
  return w;
}

/// U f(Λ) U† for a precomputed eigendecomposition.
template <typename F>
Matrix apply_function(const Eigh& e, F&& f) {
  const auto n = e.values.size();
  Matrix scaled = e.vectors;
  for (Eigen::Index k = 0; k < n; ++k) {
    scaled.col(k) *= f(e.values(k));
  }
  return scaled * e.vectors.adjoint();
}

template <typename F>
Matrix hermitian_function(const Matrix& a, F&& f) {
  return apply_function(eigh(a), std::forward<F>(f));
}

/// exp(i t X) for Hermitian X.
inline Matrix expi(const Matrix& x, double t) {
  if (x.rows() == 0) return x;
  const Eigh e = eigh(x);
  const auto n = e.values.size();
  Matrix scaled = e.vectors;
  for (Eigen::Index k = 0; k < n; ++k) {
    scaled.col(k) *= std::exp(kI * (t * e.values(k)));
  }
  return scaled * e.vectors.adjoint();
}

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& a) {
  return max_abs(a - a.adjoint());
}

inline Matrix hermitian_part(const Matrix& a) {
  return (a + a.adjoint()) * 0.5;
}

/// Hermitian "logarithm" of a unitary: G with exp(iG) = U, eigenphases in
/// (-pi, pi]. Uses the complex Schur form, which is diagonal for normal
/// matrices and always has an orthonormal basis.
inline Matrix unitary_log(const Matrix& u) {
  detail::check_square(u, "unitary_log");
  if (u.rows() == 0) return u;
  Eigen::ComplexSchur<Matrix> schur(u);
  if (schur.info() != Eigen::Success) {
    throw NumericError("unitary_log: Schur decomposition failed");
  }
  const Matrix& q = schur.matrixU();
  const Matrix& t = schur.matrixT();
  Matrix scaled = q;
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    scaled.col(k) *= std::arg(t(k, k));
  }
  return hermitian_part(scaled * q.adjoint());
}

}  // namespace linalg
}  // namespace markovgap
