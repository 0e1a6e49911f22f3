#pragma once

// Brute-force reference implementation on explicit many-body state vectors.
// Independent of the covariance-matrix formalism; used to cross-check it.
//
// Basis convention: |n_0 n_1 ... n_{N-1}> = (c_0^dagger)^{n_0} ... (c_{N-1}^dagger)^{n_{N-1}} |0>,
// stored at index sum_i n_i 2^{N-1-i} (mode 0 is the most significant bit).

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "markovgap/covariance.hpp"

namespace markovgap::oracle {

enum class Statistics { fermionic, qubit };

inline constexpr int kMaxFermionModes = 14;
inline constexpr int kMaxQubits = 18;

struct DenseState {
  int n_modes = 0;
  Vector amplitudes;
  Statistics statistics = Statistics::fermionic;

  double norm() const { return amplitudes.norm(); }
};

/// Reduced density matrix over `n_modes` modes in the basis convention above.
struct DenseDensity {
  int n_modes = 0;
  Matrix rho;
};

namespace detail {

inline int mode_bit(int n_modes, int mode) { return n_modes - 1 - mode; }

inline bool occupied(std::uint64_t basis, int n_modes, int mode) {
  return (basis >> mode_bit(n_modes, mode)) & 1u;
}

inline void check_size(int n_modes, Statistics stats) {
  const int cap = stats == Statistics::fermionic ? kMaxFermionModes : kMaxQubits;
  if (n_modes < 0 || n_modes > cap) {
    throw ValidationError("dense oracle: " + std::to_string(n_modes) + " modes exceeds cap of " +
                          std::to_string(cap));
  }
}

inline double entropy_from_probabilities(const RealVector& p) {
  double s = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p(k) > 1e-300) s -= p(k) * std::log(p(k));
  }
  return s;
}

}  // namespace detail

/// Slater determinant prod_j (sum_i psi_ij c_i^dagger) |0>. Columns of psi are
/// orthonormalized first (which changes the state only by a global factor).
inline DenseState slater_statevector(const Matrix& psi) {
  const int n = static_cast<int>(psi.rows());
  const int particles = static_cast<int>(psi.cols());
  detail::check_size(n, Statistics::fermionic);
  if (particles > n) throw ValidationError("slater_statevector: more orbitals than modes");

  const Eigen::HouseholderQR<Matrix> qr(psi);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, particles);

  DenseState state;
  state.n_modes = n;
  state.statistics = Statistics::fermionic;
  state.amplitudes = Vector::Zero(Index{1} << n);
  std::vector<Index> rows;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
    if (std::popcount(b) != particles) continue;
    rows.clear();
    for (int i = 0; i < n; ++i) {
      if (detail::occupied(b, n, i)) rows.push_back(i);
    }
    const Matrix sub = q(rows, Eigen::all);
    state.amplitudes(static_cast<Index>(b)) = particles == 0 ? cplx{1.0} : sub.determinant();
  }
  return state;
}

/// <c_i^dagger c_j> evaluated on the state vector.
inline Matrix dense_covariance(const DenseState& s) {
  const int n = s.n_modes;
  Matrix c = Matrix::Zero(n, n);
  const std::uint64_t dim = std::uint64_t{1} << n;
  for (std::uint64_t b = 0; b < dim; ++b) {
    const cplx amp = s.amplitudes(static_cast<Index>(b));
    if (amp == cplx{0.0}) continue;
    for (int j = 0; j < n; ++j) {
      if (!detail::occupied(b, n, j)) continue;
      // c_j: sign from occupied modes preceding j
      int sign_j = 0;
      for (int m = 0; m < j; ++m) sign_j += detail::occupied(b, n, m);
      const std::uint64_t removed = b & ~(std::uint64_t{1} << detail::mode_bit(n, j));
      for (int i = 0; i < n; ++i) {
        if (detail::occupied(removed, n, i)) continue;
        int sign_i = 0;
        if (s.statistics == Statistics::fermionic) {
          for (int m = 0; m < i; ++m) sign_i += detail::occupied(removed, n, m);
        }
        const int total = s.statistics == Statistics::fermionic ? sign_i + sign_j : 0;
        const std::uint64_t added = removed | (std::uint64_t{1} << detail::mode_bit(n, i));
        const double sign = (total % 2 == 0) ? 1.0 : -1.0;
        c(i, j) += sign * std::conj(s.amplitudes(static_cast<Index>(added))) * amp;
      }
    }
  }
  return c;
}

/// Relabels modes so that new mode k is old mode order[k]. For fermions each
/// basis state picks up the sign of reordering its creation operators.
inline DenseState reorder_modes(const DenseState& s, const std::vector<int>& order) {
  const int n = s.n_modes;
  if (static_cast<int>(order.size()) != n) throw ValidationError("reorder_modes: bad order");
  std::vector<int> new_pos(n, -1);
  for (int k = 0; k < n; ++k) {
    if (order[k] < 0 || order[k] >= n || new_pos[order[k]] != -1) {
      throw ValidationError("reorder_modes: order is not a permutation");
    }
    new_pos[order[k]] = k;
  }
  DenseState out = s;
  out.amplitudes.setZero();
  std::vector<int> positions;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
    const cplx amp = s.amplitudes(static_cast<Index>(b));
    if (amp == cplx{0.0}) continue;
    positions.clear();
    std::uint64_t nb = 0;
    for (int i = 0; i < n; ++i) {
      if (detail::occupied(b, n, i)) {
        positions.push_back(new_pos[i]);
        nb |= std::uint64_t{1} << detail::mode_bit(n, new_pos[i]);
      }
    }
    int inversions = 0;
    if (s.statistics == Statistics::fermionic) {
      for (std::size_t x = 0; x < positions.size(); ++x)
        for (std::size_t y = x + 1; y < positions.size(); ++y)
          inversions += positions[x] > positions[y];
    }
    out.amplitudes(static_cast<Index>(nb)) += (inversions % 2 == 0 ? 1.0 : -1.0) * amp;
  }
  return out;
}

/// Mode order placing `lead` first (in the given order), then the remaining
/// modes ascending.
inline std::vector<int> leading_order(int n_modes, const std::vector<Index>& lead) {
  std::vector<int> order(lead.begin(), lead.end());
  std::vector<char> taken(n_modes, 0);
  for (Index i : lead) taken[i] = 1;
  for (int i = 0; i < n_modes; ++i)
    if (!taken[i]) order.push_back(i);
  return order;
}

/// Coefficient matrix of the state split into the first `k` modes (rows) and
/// the rest (columns).
inline Matrix split_coefficients(const DenseState& s, int k) {
  const Index dim_rest = Index{1} << (s.n_modes - k);
  Matrix psi(Index{1} << k, dim_rest);
  for (Index row = 0; row < psi.rows(); ++row)
    for (Index col = 0; col < dim_rest; ++col) psi(row, col) = s.amplitudes(row * dim_rest + col);
  return psi;
}

/// Reduced density matrix on `keep`; kept modes become modes 0..k-1 of the
/// result in mask order.
inline DenseDensity dense_rdm(const DenseState& s, const ModeMask& keep) {
  detail::check_size(s.n_modes, s.statistics);
  keep.check_within(s.n_modes);
  const DenseState re = reorder_modes(s, leading_order(s.n_modes, keep.indices()));
  const int k = static_cast<int>(keep.size());
  const Matrix psi = split_coefficients(re, k);
  return {k, psi * psi.adjoint()};
}

inline double dense_entropy(const DenseDensity& d) {
  if (d.rho.rows() == 0) return 0.0;
  return detail::entropy_from_probabilities(linalg::eigvalsh(d.rho));
}

/// Entanglement entropy of a bipartite pure state given as its coefficient
/// matrix (rows: first party, columns: second party).
template <typename Derived>
double bipartite_entropy(const Eigen::MatrixBase<Derived>& coefficients) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const M gram = coefficients.rows() <= coefficients.cols()
                     ? M(coefficients * coefficients.adjoint())
                     : M(coefficients.adjoint() * coefficients);
  return detail::entropy_from_probabilities(linalg::eigvalsh(gram));
}

namespace detail {

/// Entropy of AA' in |sqrt(rho)>, given sqrt(rho) on AB with A the leading
/// `modes_a` modes.
template <typename Scalar>
double reflected_from_sqrt(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& sqrt_rho,
                           int modes_a, Statistics stats) {
  const Index dim = sqrt_rho.rows();
  const Index da = Index{1} << modes_a;
  const Index db = dim / da;
  const Index flip = dim - 1;
  // coefficients[(a, a'), (b, b')] = <a b| sqrt(rho) |a' b'>, auxiliary index
  // relabelled by the purification map.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coefficients(da * da, db * db);
  for (Index col = 0; col < dim; ++col) {
    const Index aux = stats == Statistics::fermionic ? (flip ^ col) : col;
    const Index ap = aux / db, bp = aux % db;
    for (Index row = 0; row < dim; ++row) {
      const Index a = row / db, b = row % db;
      coefficients(a * da + ap, b * db + bp) = sqrt_rho(row, col);
    }
  }
  return bipartite_entropy(coefficients);
}

}  // namespace detail

/// S_R(A:B) from the canonical purification |sqrt(rho_AB)>. The first
/// `modes_a` modes of rho_AB form A. For fermions the auxiliary copy is
/// mapped by the particle-hole transformation <{n}| -> |{1 - n}>, for qubits
/// by plain transposition.
inline double dense_reflected_entropy(const DenseDensity& rho_ab, int modes_a,
                                      Statistics stats = Statistics::fermionic) {
  const Index dim = rho_ab.rho.rows();
  if (modes_a < 0 || modes_a > rho_ab.n_modes) {
    throw ValidationError("dense_reflected_entropy: bad split");
  }
  if (dim > (Index{1} << 14)) throw ValidationError("dense_reflected_entropy: matrix too large");
  const linalg::Eigh e = linalg::eigh(rho_ab.rho);
  if (e.values.size() > 0 && e.values.minCoeff() < -1e-10) {
    throw ValidationError("dense_reflected_entropy: density matrix is not positive");
  }
  const Matrix sqrt_rho =
      linalg::apply_function(e, [](double v) { return std::sqrt(std::max(v, 0.0)); });
  return detail::reflected_from_sqrt(sqrt_rho, modes_a, stats);
}

struct DenseGapParts {
  double entropy_a = 0.0;
  double entropy_b = 0.0;
  double entropy_ab = 0.0;
  double reflected_entropy = 0.0;
  double mutual_information = 0.0;
  double markov_gap = 0.0;
};

/// All entropies entering h(A:B) for a pure state. sqrt(rho_AB) is taken from
/// the Schmidt decomposition of the state across AB | C, which is exact and
/// avoids diagonalizing the full rho_AB.
inline DenseGapParts dense_markov_gap_parts(const DenseState& s, const ModeMask& a,
                                            const ModeMask& b) {
  if (!disjoint(a, b)) throw ValidationError("dense_markov_gap: masks overlap");
  detail::check_size(s.n_modes, s.statistics);
  a.check_within(s.n_modes);
  b.check_within(s.n_modes);
  std::vector<Index> lead(a.begin(), a.end());
  lead.insert(lead.end(), b.begin(), b.end());
  const DenseState re = reorder_modes(s, leading_order(s.n_modes, lead));
  const int na = static_cast<int>(a.size());
  const int nab = na + static_cast<int>(b.size());

  const Matrix psi = split_coefficients(re, nab);
  Eigen::BDCSVD<Matrix> svd(psi, Eigen::ComputeThinU);
  const RealVector sv = svd.singularValues();
  const Matrix& u = svd.matrixU();
  const Matrix sqrt_rho = u * sv.cast<cplx>().asDiagonal() * u.adjoint();

  DenseGapParts p;
  p.entropy_ab = detail::entropy_from_probabilities(sv.array().square().matrix());
  p.entropy_a = bipartite_entropy(split_coefficients(re, na));
  // S(B): move B to the front.
  p.entropy_b = bipartite_entropy(split_coefficients(
      reorder_modes(s, leading_order(s.n_modes, b.indices())), static_cast<int>(b.size())));
  const bool real = sqrt_rho.imag().cwiseAbs().maxCoeff() == 0.0;
  p.reflected_entropy = real ? detail::reflected_from_sqrt(RealMatrix(sqrt_rho.real()), na, s.statistics)
                             : detail::reflected_from_sqrt(sqrt_rho, na, s.statistics);
  p.mutual_information = p.entropy_a + p.entropy_b - p.entropy_ab;
  p.markov_gap = p.reflected_entropy - p.mutual_information;
  return p;
}

inline double dense_markov_gap(const DenseState& s, const ModeMask& a, const ModeMask& b) {
  return dense_markov_gap_parts(s, a, b).markov_gap;
}

/// Normalized qubit state from (bitstring, amplitude) terms; bitstring[q] is
/// the value of qubit q.
inline DenseState qubit_state(int n_qubits,
                              const std::vector<std::pair<std::vector<int>, cplx>>& terms) {
  detail::check_size(n_qubits, Statistics::qubit);
  DenseState s;
  s.n_modes = n_qubits;
  s.statistics = Statistics::qubit;
  s.amplitudes = Vector::Zero(Index{1} << n_qubits);
  for (const auto& [bits, amp] : terms) {
    if (static_cast<int>(bits.size()) != n_qubits) throw ValidationError("qubit_state: bad bitstring");
    std::uint64_t idx = 0;
    for (int q = 0; q < n_qubits; ++q) idx = (idx << 1) | static_cast<std::uint64_t>(bits[q] & 1);
    s.amplitudes(static_cast<Index>(idx)) += amp;
  }
  s.amplitudes.normalize();
  return s;
}

// ---------------------------------------------------------------------------
// Reduced toric code on the three-region sphere.

struct ToricSots {
  DenseState state;
  ModeMask a, b, c;
};

/// Six-qubit pair factor |XY(s)> on (X_0, X_1, X_2, Y_0, Y_1, Y_2):
/// 2^{-1/2} |s>_X0 |s>_Y0 sum_q |q>_X1 |q>_Y1 |q+s>_X2 |q+s>_Y2.
inline Vector toric_pair_factor(int s) {
  Vector v = Vector::Zero(64);
  for (int q = 0; q < 2; ++q) {
    const int x[3] = {s, q, q ^ s};
    int idx = 0;
    for (int k = 0; k < 3; ++k) idx = (idx << 1) | x[k];
    for (int k = 0; k < 3; ++k) idx = (idx << 1) | x[k];
    v(idx) += 1.0 / std::sqrt(2.0);
  }
  return v;
}

/// sum_s 2^{-1/2} |AB(s)> |BC(s)> |CA(s)> on 18 qubits. Qubits 0-2: A_R,
/// 3-5: B_L, 6-8: B_R, 9-11: C_L, 12-14: C_R, 15-17: A_L.
inline ToricSots toric_sots_state() {
  ToricSots out;
  out.state.n_modes = 18;
  out.state.statistics = Statistics::qubit;
  out.state.amplitudes = Vector::Zero(Index{1} << 18);
  for (int s = 0; s < 2; ++s) {
    const Vector f = toric_pair_factor(s);
    for (Index i = 0; i < 64; ++i) {
      if (f(i) == cplx{0.0}) continue;
      for (Index j = 0; j < 64; ++j) {
        if (f(j) == cplx{0.0}) continue;
        for (Index k = 0; k < 64; ++k) {
          if (f(k) == cplx{0.0}) continue;
          out.state.amplitudes((i << 12) | (j << 6) | k) += f(i) * f(j) * f(k) / std::sqrt(2.0);
        }
      }
    }
  }
  out.a = ModeMask{0, 1, 2, 15, 16, 17};
  out.b = ModeMask{3, 4, 5, 6, 7, 8};
  out.c = ModeMask{9, 10, 11, 12, 13, 14};
  return out;
}

}  // namespace markovgap::oracle
