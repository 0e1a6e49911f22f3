#pragma once

// Seeded random states for cross-checks: Haar-like unitaries, Slater
// determinants and mixed covariances.

#include <random>
#include <utility>
#include <vector>

#include "markovgap/covariance.hpp"

namespace markovgap::sampling {

using Rng = std::mt19937_64;

inline Matrix random_complex(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

inline Matrix random_hermitian(Rng& rng, Index n) {
  const Matrix m = random_complex(rng, n, n);
  return (m + m.adjoint()) * 0.5;
}

/// Haar-ish unitary from the QR decomposition of a Gaussian matrix.
inline Matrix random_unitary(Rng& rng, Index n) {
  const Eigen::HouseholderQR<Matrix> qr(random_complex(rng, n, n));
  return qr.householderQ() * Matrix::Identity(n, n);
}

/// n x particles matrix with orthonormal columns.
inline Matrix random_orbitals(Rng& rng, Index n, Index particles) {
  return random_unitary(rng, n).leftCols(particles);
}

/// <c_i^dagger c_j> of the Slater determinant built from `orbitals`.
inline Matrix slater_covariance(const Matrix& orbitals) {
  return (orbitals * orbitals.adjoint()).conjugate();
}

/// Covariance U diag(occupations) U^dagger with occupations drawn in (lo, hi).
inline Matrix random_mixed_covariance(Rng& rng, Index n, double lo = 0.05, double hi = 0.95) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealVector occ(n);
  for (Index k = 0; k < n; ++k) occ(k) = u(rng);
  const Matrix v = random_unitary(rng, n);
  return linalg::hermitian_part(v * occ.cast<cplx>().asDiagonal() * v.adjoint());
}

/// Random Slater state on `n` modes with `particles` fermions, covariance
/// only.
inline Matrix random_pure_covariance(Rng& rng, Index n, Index particles) {
  return linalg::hermitian_part(slater_covariance(random_orbitals(rng, n, particles)));
}

/// Random Hermitian direction of unit Frobenius norm.
inline Matrix random_direction(Rng& rng, Index n) {
  Matrix d = random_hermitian(rng, n);
  return d / d.norm();
}

/// Random tripartition of n modes with nonempty A and B; the rest is C.
inline std::pair<ModeMask, ModeMask> random_split(Rng& rng, Index n) {
  while (true) {
    std::vector<Index> a, b;
    for (Index i = 0; i < n; ++i) {
      const auto r = rng() % 3;
      if (r == 0) a.push_back(i);
      if (r == 1) b.push_back(i);
    }
    if (!a.empty() && !b.empty()) return {ModeMask(a), ModeMask(b)};
  }
}

}  // namespace markovgap::sampling
