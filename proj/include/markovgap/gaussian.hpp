#pragma once

// Entanglement quantities of Gaussian fermionic states from their covariance
// matrix: entanglement Hamiltonians, von Neumann entropy, mutual information,
// the canonical-purification covariance, reflected entropy and the Markov gap
// h(A:B) = S_R(A:B) - I(A:B). All entropies are in nats.

#include <algorithm>
#include <cmath>
#include <string>

#include "markovgap/covariance.hpp"

namespace markovgap {

/// Eigenvalues within this distance of 0 or 1 contribute nothing to entropy
/// sums (0 log 0 = 0).
inline constexpr double kEntropyEps = 1e-12;
/// Eigenvalue clamp for log((1 - c) / c).
inline constexpr double kHamiltonianEps = 1e-8;
/// Spectra beyond [-tol, 1 + tol] are rejected as corrupt.
inline constexpr double kSpectrumTolerance = 1e-6;

/// Single-particle operator h = log((I - C) / C).
struct EntanglementHamiltonian {
  Matrix entries;
  Index dim() const { return entries.rows(); }
};

struct ReflectedCovariance {
  Index base_dim = 0;
  Matrix entries;    // [[C, K], [K, I - C]]
  Matrix off_block;  // K = sqrt(C (I - C))
};

namespace detail {

inline void check_spectrum(const RealVector& values, const char* what) {
  for (Index k = 0; k < values.size(); ++k) {
    const double v = values(k);
    if (!(v >= -kSpectrumTolerance && v <= 1.0 + kSpectrumTolerance)) {
      throw CorruptCovarianceError(std::string(what) + ": covariance eigenvalue " +
                                   std::to_string(v) + " outside [0, 1]");
    }
  }
}

inline void check_eps(double eps, const char* what) {
  if (!(eps > 0.0 && eps <= 1e-4)) {
    throw ValidationError(std::string(what) + ": eigenvalue clamp must lie in (0, 1e-4]");
  }
}

}  // namespace detail

inline double binary_entropy(double lambda, double eps = kEntropyEps) {
  if (lambda <= eps || lambda >= 1.0 - eps) return 0.0;
  return -lambda * std::log(lambda) - (1.0 - lambda) * std::log1p(-lambda);
}

inline double entropy_of_spectrum(const RealVector& values, double eps = kEntropyEps) {
  double s = 0.0;
  for (Index k = 0; k < values.size(); ++k) s += binary_entropy(values(k), eps);
  return s;
}

inline double entanglement_energy(double lambda, double eps) {
  const double c = std::clamp(lambda, eps, 1.0 - eps);
  return std::log((1.0 - c) / c);
}

/// h from a precomputed eigendecomposition of the covariance.
inline EntanglementHamiltonian entanglement_hamiltonian(const linalg::Eigh& e,
                                                        double eps = kHamiltonianEps) {
  detail::check_spectrum(e.values, "entanglement_hamiltonian");
  return {linalg::apply_function(e, [eps](double v) { return entanglement_energy(v, eps); })};
}

inline EntanglementHamiltonian entanglement_hamiltonian(const CovarianceMatrix& c,
                                                        double eps = kHamiltonianEps) {
  detail::check_eps(eps, "entanglement_hamiltonian");
  return entanglement_hamiltonian(linalg::eigh(c.entries()), eps);
}

inline double entropy(const Matrix& c, double eps = kEntropyEps) {
  if (c.rows() == 0) return 0.0;
  const RealVector values = linalg::eigvalsh(c);
  detail::check_spectrum(values, "entropy");
  return entropy_of_spectrum(values, eps);
}

inline double entropy(const CovarianceMatrix& c, double eps = kEntropyEps) {
  detail::check_eps(eps, "entropy");
  return entropy(c.entries(), eps);
}

inline double mutual_information(const CovarianceMatrix& c, const ModeMask& a, const ModeMask& b,
                                 double eps = kEntropyEps) {
  detail::check_eps(eps, "mutual_information");
  if (!disjoint(a, b)) throw ValidationError("mutual_information: masks overlap");
  a.check_within(c.dim());
  b.check_within(c.dim());
  const Matrix& m = c.entries();
  return entropy(restrict(m, a), eps) + entropy(restrict(m, b), eps) -
         entropy(restrict(m, mask_union(a, b)), eps);
}

/// sqrt(C (I - C)) from the eigendecomposition of C, eigenvalues clamped
/// into [0, 1].
inline Matrix purification_off_block(const linalg::Eigh& e) {
  return linalg::apply_function(e, [](double v) {
    const double r = std::clamp(v, 0.0, 1.0);
    return std::sqrt(r * (1.0 - r));
  });
}

inline ReflectedCovariance reflected_covariance(const CovarianceMatrix& c_ab) {
  const linalg::Eigh e = linalg::eigh(c_ab.entries());
  detail::check_spectrum(e.values, "reflected_covariance");
  const Index n = c_ab.dim();
  ReflectedCovariance out;
  out.base_dim = n;
  out.off_block = linalg::hermitian_part(purification_off_block(e));
  out.entries.resize(2 * n, 2 * n);
  out.entries.topLeftCorner(n, n) = c_ab.entries();
  out.entries.topRightCorner(n, n) = out.off_block;
  out.entries.bottomLeftCorner(n, n) = out.off_block;
  out.entries.bottomRightCorner(n, n) = Matrix::Identity(n, n) - c_ab.entries();
  return out;
}

/// Mask of A together with its auxiliary copy A' (mode i' = base_dim + i).
inline ModeMask doubled_mask(const ModeMask& a, Index base_dim) {
  std::vector<Index> idx(a.begin(), a.end());
  for (Index i : a) idx.push_back(base_dim + i);
  return ModeMask(std::move(idx));
}

/// Covariance of AA' inside the canonical purification, assembled from the
/// eigendecomposition of C_AB without forming the full 2n x 2n matrix.
inline Matrix reflected_block(const Matrix& c_ab, const linalg::Eigh& e, const ModeMask& a) {
  const Index na = static_cast<Index>(a.size());
  const Matrix u_a = e.vectors(a.indices(), Eigen::all);
  Matrix scaled = u_a;
  for (Index k = 0; k < e.values.size(); ++k) {
    const double r = std::clamp(e.values(k), 0.0, 1.0);
    scaled.col(k) *= std::sqrt(r * (1.0 - r));
  }
  const Matrix k_aa = scaled * u_a.adjoint();
  const Matrix c_a = restrict(c_ab, a);
  Matrix block(2 * na, 2 * na);
  block.topLeftCorner(na, na) = c_a;
  block.topRightCorner(na, na) = k_aa;
  block.bottomLeftCorner(na, na) = k_aa.adjoint();
  block.bottomRightCorner(na, na) = Matrix::Identity(na, na) - c_a;
  return linalg::hermitian_part(block);
}

inline double reflected_entropy(const CovarianceMatrix& c_ab, const ModeMask& a,
                                double eps = kEntropyEps) {
  detail::check_eps(eps, "reflected_entropy");
  a.check_within(c_ab.dim());
  const linalg::Eigh e = linalg::eigh(c_ab.entries());
  detail::check_spectrum(e.values, "reflected_entropy");
  return entropy(reflected_block(c_ab.entries(), e, a), eps);
}

/// Every entropy entering h(A:B).
struct MarkovGapParts {
  double entropy_a = 0.0;
  double entropy_b = 0.0;
  double entropy_ab = 0.0;
  double reflected_entropy = 0.0;
  double mutual_information = 0.0;
  double markov_gap = 0.0;
};

/// All parts of h(A:B); A and B are arbitrary disjoint masks of `c`.
inline MarkovGapParts markov_gap_parts(const Matrix& c, const ModeMask& a, const ModeMask& b,
                                       double eps = kEntropyEps) {
  if (!disjoint(a, b)) throw ValidationError("markov_gap: masks overlap");
  a.check_within(c.rows());
  b.check_within(c.rows());
  const ModeMask ab = mask_union(a, b);
  const Matrix c_ab = restrict(c, ab);
  const ModeMask a_local = ab.relabel(a);

  MarkovGapParts p;
  p.entropy_a = entropy(restrict(c, a), eps);
  p.entropy_b = entropy(restrict(c, b), eps);
  const linalg::Eigh e = linalg::eigh(c_ab);
  detail::check_spectrum(e.values, "markov_gap");
  p.entropy_ab = entropy_of_spectrum(e.values, eps);
  p.reflected_entropy = entropy(reflected_block(c_ab, e, a_local), eps);
  p.mutual_information = p.entropy_a + p.entropy_b - p.entropy_ab;
  p.markov_gap = p.reflected_entropy - p.mutual_information;
  return p;
}

inline double markov_gap(const CovarianceMatrix& c, const ModeMask& a, const ModeMask& b,
                         double eps = kEntropyEps) {
  detail::check_eps(eps, "markov_gap");
  return markov_gap_parts(c.entries(), a, b, eps).markov_gap;
}

}  // namespace markovgap
